#include <gtest/gtest.h>

#include <filesystem>

#include "ctxrank/blender.hpp"
#include "ctxrank/evaluator.hpp"
#include "ctxrank/random.hpp"

using namespace ctxrank;

namespace {

/// Pool of `queries` labeled queries of 10 docs.
BlendPool make_pool(std::size_t queries, std::uint64_t seed) {
  Rng rng(seed);
  BlendPool p;
  for (std::size_t q = 0; q < queries; ++q) {
    for (int i = 0; i < 10; ++i) {
      p.gains.push_back(i == 0 ? 2 : static_cast<int>(rng.below(3)));
      p.base_ranks.push_back(i + 1);
    }
    p.offsets.push_back(p.gains.size());
    p.fit_eligible.push_back(true);
  }
  return p;
}

std::vector<double> perfect(const BlendPool& p) { return {p.gains.begin(), p.gains.end()}; }

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform();
  return v;
}

/// Per-query argsorts of `scores`.
std::vector<std::vector<int>> rankings(const BlendPool& p, const std::vector<double>& scores) {
  std::vector<std::vector<int>> out;
  for (std::size_t q = 0; q < p.queries(); ++q) {
    const auto b = p.offsets[q], e = p.offsets[q + 1];
    out.push_back(rank_by_score(std::span(scores).subspan(b, e - b), std::span(p.base_ranks).subspan(b, e - b)));
  }
  return out;
}

double pool_ndcg(const BlendPool& p, const std::vector<double>& scores) {
  const auto r = rankings(p, scores);
  double sum = 0;
  for (std::size_t q = 0; q < p.queries(); ++q) {
    sum += ndcg_at(r[q], std::span(p.gains).subspan(p.offsets[q], p.offsets[q + 1] - p.offsets[q]));
  }
  return sum / static_cast<double>(p.queries());
}

}  // namespace

TEST(Average, SingleMemberKeepsRanking) {
  const auto p = make_pool(20, 1);
  const auto s = noise(p.gains.size(), 2);
  EXPECT_EQ(rankings(p, blend_average({s})), rankings(p, s));
}

TEST(Average, IdenticalMembersKeepRanking) {
  const auto p = make_pool(20, 1);
  const auto s = noise(p.gains.size(), 2);
  const auto b = blend_average({s, s});
  EXPECT_EQ(rankings(p, b), rankings(p, s));
  EXPECT_EQ(rankings(p, blend_average({b, b})), rankings(p, b));
}

TEST(Average, PerfectPlusNoiseLiesBetween) {
  const auto p = make_pool(300, 4);
  const auto a = perfect(p);
  const auto b = noise(p.gains.size(), 5);
  const double blended = pool_ndcg(p, blend_average({a, b}));
  EXPECT_LT(blended, pool_ndcg(p, a));
  EXPECT_GT(blended, pool_ndcg(p, b));
}

TEST(Average, AffineRescalingKeepsRanking) {
  const auto p = make_pool(30, 6);
  const auto a = noise(p.gains.size(), 7);
  const auto b = noise(p.gains.size(), 8);
  auto scaled = b;
  for (auto& x : scaled) x = 3.5 * x - 12.0;
  EXPECT_EQ(rankings(p, blend_average({a, b})), rankings(p, blend_average({a, scaled})));
}

TEST(Average, RaggedInputThrows) {
  EXPECT_THROW(blend_average({{1.0, 2.0}, {1.0}}), DataError);
}

TEST(Learned, WeightSignsFollowUsefulness) {
  const auto p = make_pool(80, 9);
  const auto good = perfect(p);
  auto bad = good;
  for (auto& x : bad) x = -x;
  const auto m = blend_learned({good, bad}, {"good", "bad"}, p, 3);
  ASSERT_EQ(m.weights.size(), 2u);
  EXPECT_GT(m.weights[0], 0.0);
  EXPECT_LE(m.weights[1], 0.0);
  EXPECT_EQ(m.fit_queries + m.holdout_queries, 80u);
}

TEST(Learned, DuplicatedMemberKeepsRanking) {
  const auto p = make_pool(60, 10);
  auto s = perfect(p);
  const auto n = noise(s.size(), 11);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] += 2.0 * n[i];
  const auto m = blend_learned({s, s}, {"a", "b"}, p, 1);
  EXPECT_EQ(rankings(p, apply_blend(m, {s, s})), rankings(p, s));
}

TEST(Learned, AffineRescalingKeepsRanking) {
  const auto p = make_pool(60, 12);
  const auto a = perfect(p);
  const auto b = noise(a.size(), 13);
  auto scaled = b;
  for (auto& x : scaled) x = 0.01 * x + 100.0;
  const auto m1 = blend_learned({a, b}, {"a", "b"}, p, 2);
  const auto m2 = blend_learned({a, scaled}, {"a", "b"}, p, 2);
  EXPECT_EQ(rankings(p, apply_blend(m1, {a, b})), rankings(p, apply_blend(m2, {a, scaled})));
}

TEST(Learned, Errors) {
  const auto p = make_pool(10, 1);
  const auto s = perfect(p);
  EXPECT_THROW(blend_learned({s}, {"a"}, p, 1), DataError);
  auto tiny = make_pool(1, 1);
  const auto t = perfect(tiny);
  EXPECT_THROW(blend_learned({t, t}, {"a", "b"}, tiny, 1), DataError);
  EXPECT_THROW(blend_learned({s, std::vector<double>(3)}, {"a", "b"}, p, 1), DataError);
}

TEST(Learned, ManifestRoundTrip) {
  const auto p = make_pool(40, 14);
  const auto a = perfect(p);
  const auto b = noise(a.size(), 15);
  const auto m = blend_learned({a, b}, {"a", "b"}, p, 5);
  const auto path = std::filesystem::temp_directory_path() / "ctxrank_blend_test.json";
  save_blend(path, m);
  const auto back = load_blend(path);
  EXPECT_EQ(back.members, m.members);
  EXPECT_EQ(back.weights, m.weights);
  EXPECT_EQ(apply_blend(back, {a, b}), apply_blend(m, {a, b}));
  std::filesystem::remove(path);
}

TEST(Names, BlendMethodParse) {
  EXPECT_EQ(parse_blend_method("learned"), BlendMethod::Learned);
  EXPECT_EQ(parse_blend_method(blend_method_name(BlendMethod::Average)), BlendMethod::Average);
  EXPECT_THROW(parse_blend_method("median"), ConfigError);
}
