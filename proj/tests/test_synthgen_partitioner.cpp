#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "ctxrank/log_model.hpp"
#include "ctxrank/partitioner.hpp"
#include "ctxrank/synthgen.hpp"
#include "support.hpp"

using namespace ctxrank;
using namespace ctxrank::testing;

TEST(Generator, SameSeedSameBytes) {
  const auto c = small_config(30);
  EXPECT_EQ(generate_text(c), generate_text(c));
  auto other = c;
  other.rng_seed = 8;
  EXPECT_NE(generate_text(c), generate_text(other));
}

TEST(Generator, OutputParsesWithTenResultsAndValidClicks) {
  const auto c = small_config(40);
  const auto records = parse_log(generate_text(c));
  for (const auto& r : records) {
    if (const auto* q = std::get_if<QueryAction>(&r)) {
      EXPECT_EQ(q->results.size(), kSerpSize);
    }
  }
  // sessionize rejects clicks outside their SERP.
  const auto sessions = sessionize(records);
  std::int64_t tests = 0;
  for (const auto& s : sessions) {
    for (const auto& imp : s.impressions) tests += imp.is_test;
  }
  EXPECT_EQ(tests, c.n_users);
}

TEST(Generator, StatsMatchParsedCounts) {
  const auto c = small_config(50);
  std::ostringstream out;
  const auto gen = generate(c, out);
  const auto records = parse_log(out.str());
  auto sessions = sessionize(records);
  label_sessions(sessions);
  const auto st = compute_stats(sessions, c.train_days());
  EXPECT_EQ(gen.records, static_cast<std::int64_t>(records.size()));
  EXPECT_EQ(gen.sessions, static_cast<std::int64_t>(sessions.size()));
  EXPECT_EQ(gen.training_sessions, st.training_sessions);
  EXPECT_EQ(gen.test_sessions, st.test_sessions);
  EXPECT_EQ(gen.impressions, st.impressions);
  EXPECT_EQ(gen.clicks, st.clicks);
  EXPECT_EQ(gen.training_clicks, st.training_clicks);
  EXPECT_EQ(gen.users, st.unique_users);
  EXPECT_EQ(gen.unique_queries, st.unique_queries);
  EXPECT_EQ(gen.unique_documents, st.unique_documents);
}

TEST(Generator, RejectsInvalidConfig) {
  auto c = small_config(10);
  c.preference_strength = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config(0);
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Generator, ConfigRoundTrip) {
  auto c = small_config(123, 99);
  c.preference_strength = 0.3;
  KeyValueConfig kv;
  c.to_config(kv);
  const auto back = GenConfig::from_config(kv);
  EXPECT_EQ(back.n_users, 123);
  EXPECT_EQ(back.rng_seed, 99u);
  EXPECT_EQ(back.preference_strength, 0.3);
}

namespace {

std::string session_with_relevant_click(SessionId sid, int day, UserId user, QueryId q) {
  return meta_line(sid, day, user) + query_line(sid, 0, 0, q, {1}) + click_line(sid, 5, 0, 103);
}

}  // namespace

TEST(Partition, TrainingTargetIsLatestQualifyingImpression) {
  // Days 5, 12, 27 each with a relevant click; the day-27 session has two
  // qualifying impressions; the last one is chosen.
  std::string log = session_with_relevant_click(1, 5, 9, 10) + session_with_relevant_click(2, 12, 9, 11);
  log += meta_line(3, 27, 9) + query_line(3, 0, 0, 12, {1}) + click_line(3, 5, 0, 101) +
         query_line(3, 100, 1, 13, {2}) + click_line(3, 110, 1, 102) + query_line(3, 900, 2, 14, {3});
  log += meta_line(4, 28, 9) + query_line(4, 0, 0, 15, {4}) + click_line(4, 5, 0, 101) +
         query_line(4, 500, 1, 16, {5}, 100, true);
  const auto sessions = labeled_sessions(log);
  const auto t = select_targets(sessions, 27, 1);
  ASSERT_EQ(t.train.size(), 1u);
  EXPECT_EQ(t.train[0].session_id, 3);
  EXPECT_EQ(t.train[0].serp_id, 1);
  ASSERT_EQ(t.test.size(), 1u);
  EXPECT_EQ(t.test[0].session_id, 4);
  EXPECT_EQ(t.test[0].serp_id, 1);
  ASSERT_EQ(t.validation.size(), 1u);
  EXPECT_EQ(t.validation[0].session_id, 4);
  EXPECT_EQ(t.validation[0].serp_id, 0);
}

TEST(Partition, UserWithoutRelevantHistoryHasNoTrainingTarget) {
  const std::string log = meta_line(1, 3, 4) + query_line(1, 0, 0, 10, {1}) + meta_line(2, 28, 4) +
                          query_line(2, 0, 0, 11, {1}, 100, true);
  const auto t = select_targets(labeled_sessions(log), 27, 1);
  EXPECT_TRUE(t.train.empty());
  EXPECT_TRUE(t.validation.empty());
  EXPECT_EQ(t.test.size(), 1u);
}

TEST(Partition, SyntheticTargetsAreRelevantOrderedAndReproducible) {
  const auto c = small_config(150);
  const auto sessions = generated_sessions(c);
  Corpus corpus(sessions);
  const auto a = select_targets(sessions, c.train_days(), 3);
  const auto b = select_targets(sessions, c.train_days(), 3);
  EXPECT_EQ(a, b);
  for (const auto* list : {&a.train, &a.validation}) {
    for (const auto& t : *list) EXPECT_TRUE(corpus.impression(t.session_id, t.serp_id).has_relevant());
  }
  const auto order = SessionOrder::build(sessions, 3);
  std::map<UserId, TargetRef> test_of;
  for (const auto& t : a.test) test_of[t.user_id] = t;
  for (const auto& v : a.validation) {
    const auto& t = test_of.at(v.user_id);
    const auto pv = order.position(v.session_id);
    const auto pt = order.position(t.session_id);
    const auto& sv = corpus.session(v.session_id);
    const auto& st = corpus.session(t.session_id);
    const auto iv = static_cast<std::size_t>(sv.find(v.serp_id) - sv.impressions.data());
    const auto it = static_cast<std::size_t>(st.find(t.serp_id) - st.impressions.data());
    EXPECT_LT(std::tie(pv.day, pv.rank_in_day, iv), std::tie(pt.day, pt.rank_in_day, it));
  }
}

TEST(Partition, TargetsFileRoundTrip) {
  const auto c = small_config(40);
  const auto t = select_targets(generated_sessions(c), c.train_days(), 1);
  const auto path = std::filesystem::temp_directory_path() / "ctxrank_targets_test.csv";
  write_targets(path, t);
  auto back = read_targets(path);
  back.skipped_users = t.skipped_users;
  EXPECT_EQ(back, t);
  std::filesystem::remove(path);
}

TEST(SessionOrderTest, SameDayTiesDependOnSeedOnly) {
  std::string log;
  for (SessionId s = 1; s <= 6; ++s) log += meta_line(s, 2, 5) + query_line(s, 0, 0, s, {1});
  const auto sessions = labeled_sessions(log);
  auto ranks = [&](std::uint64_t seed) {
    const auto o = SessionOrder::build(sessions, seed);
    std::vector<SessionId> ids;
    for (const Session* s : o.timeline(5)) ids.push_back(s->session_id);
    return ids;
  };
  EXPECT_EQ(ranks(1), ranks(1));
  std::set<std::vector<SessionId>> distinct;
  for (std::uint64_t s = 0; s < 8; ++s) distinct.insert(ranks(s));
  EXPECT_GT(distinct.size(), 1u);
}
