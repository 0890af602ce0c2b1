#include <gtest/gtest.h>

#include <zlib.h>

#include <filesystem>
#include <fstream>

#include "ctxrank/config.hpp"
#include "ctxrank/io.hpp"
#include "ctxrank/pipeline.hpp"

using namespace ctxrank;
namespace fs = std::filesystem;

TEST(KeyValue, ParsesCommentsAndOverrides) {
  auto kv = KeyValueConfig::parse("# top\nwork_dir = out  \n train_days=20 # inline\n\ntrain_days = 25\n");
  EXPECT_EQ(kv.get_string("work_dir", ""), "out");
  EXPECT_EQ(kv.get_int("train_days", 0), 25);
  kv.set_assignment("train_days=26");
  EXPECT_EQ(kv.get_int("train_days", 0), 26);
  EXPECT_EQ(kv.get_double("missing", 1.5), 1.5);
  EXPECT_THROW(kv.set_assignment("no_equals_sign"), ConfigError);
  EXPECT_THROW(KeyValueConfig::parse("just words\n"), ConfigError);
}

TEST(KeyValue, TypedGettersRejectGarbage) {
  const auto kv = KeyValueConfig::parse("a = x1\nb = yes\nc = 0.5e\n");
  EXPECT_THROW(kv.get_int("a", 0), ConfigError);
  EXPECT_TRUE(kv.get_bool("b", false));
  EXPECT_THROW(kv.get_double("c", 0), ConfigError);
}

TEST(PipelineConfigTest, DefaultsAndValidation) {
  const auto cfg = PipelineConfig::from(KeyValueConfig{});
  EXPECT_EQ(cfg.train_days, 27);
  EXPECT_EQ(cfg.truncation, 10);
  EXPECT_EQ(cfg.train.hidden, 64u);
  EXPECT_EQ(cfg.train.batch_queries, 100u);
  EXPECT_EQ(cfg.model_path(ModelKind::RankNet).filename(), "model_ranknet.json");
  auto kv = KeyValueConfig::parse("train.hidden = 5\n");
  EXPECT_THROW(PipelineConfig::from(kv), ConfigError);
  kv = KeyValueConfig::parse("gen.n_users = 0\n");
  EXPECT_THROW(PipelineConfig::from(kv), ConfigError);
  kv = KeyValueConfig::parse("gen.n_users = 12\nseed.blend = 4\n");
  const auto c2 = PipelineConfig::from(kv);
  EXPECT_EQ(c2.gen.n_users, 12);
  EXPECT_EQ(c2.blend_seed, 4u);
}

TEST(Io, AtomicWriteLeavesNoTemporaries) {
  const auto dir = fs::temp_directory_path() / "ctxrank_io_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto path = dir / "a.txt";
  io::atomic_write(path, [](std::ostream& out) { out << "one\n"; });
  io::atomic_write(path, [](std::ostream& out) { out << "two\n"; });
  EXPECT_EQ(io::read_text(path), "two\n");
  EXPECT_THROW(io::atomic_write(path, [](std::ostream&) { throw std::runtime_error("boom"); }), std::runtime_error);
  EXPECT_EQ(io::read_text(path), "two\n");
  EXPECT_EQ(std::distance(fs::directory_iterator(dir), fs::directory_iterator{}), 1);
  fs::remove_all(dir);
}

TEST(Io, ReadsGzip) {
  const auto path = fs::temp_directory_path() / "ctxrank_io_test.gz";
  const std::string text = "1\tM\t3\t100\n";
  gzFile f = gzopen(path.string().c_str(), "wb");
  ASSERT_NE(f, nullptr);
  gzwrite(f, text.data(), static_cast<unsigned>(text.size()));
  gzclose(f);
  EXPECT_EQ(io::read_text(path), text);
  fs::remove(path);
}

TEST(Io, RequireFileNamesThePath) {
  try {
    io::require_file("/nonexistent/scores.csv");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/scores.csv"), std::string::npos);
  }
}

TEST(Io, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345678.901234567, 0.0}) {
    EXPECT_EQ(io::parse_double(io::format_double(v), "v"), v);
  }
}
