#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ctxrank/evaluator.hpp"
#include "ctxrank/random.hpp"
#include "support.hpp"

using namespace ctxrank;
using namespace ctxrank::testing;

namespace {

std::vector<int> identity(int n = 10) {
  std::vector<int> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), 0);
  return v;
}

std::vector<std::int64_t> ids(std::initializer_list<std::int64_t> l) { return l; }

std::vector<ScoreRow> target_rows(SessionId sid, const std::vector<int>& gains, const std::vector<double>& scores) {
  std::vector<ScoreRow> rows;
  for (std::size_t i = 0; i < gains.size(); ++i) {
    ScoreRow r;
    r.role = Role::Validation;
    r.user_id = sid;
    r.session_id = sid;
    r.doc_id = static_cast<ItemId>(1000 + i);
    r.base_rank = static_cast<int>(i) + 1;
    r.gain = gains[i];
    r.score = scores[i];
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

TEST(Ndcg, IdealOrderIsOne) {
  EXPECT_DOUBLE_EQ(ndcg_at(identity(), std::vector<int>{2, 2, 1, 1, 0, 0, 0, 0, 0, 0}), 1.0);
}

TEST(Ndcg, SingleRelevantAtBottom) {
  std::vector<int> gains(10, 0);
  gains[0] = 2;
  std::vector<int> order = {1, 2, 3, 4, 5, 6, 7, 8, 9, 0};
  EXPECT_NEAR(ndcg_at(order, gains), 1.0 / std::log2(11.0), 1e-15);
  // 0.28907 is quoted from the rounded DCG 0.86720 / 3.
  EXPECT_NEAR(ndcg_at(order, gains), 0.28907, 1e-5);
  EXPECT_NEAR(ndcg_at(order, gains), oracle_ndcg(order, gains), 1e-12);
}

TEST(Ndcg, AllZeroGainsIsOne) { EXPECT_EQ(ndcg_at(identity(), std::vector<int>(10, 0)), 1.0); }

TEST(Ndcg, RejectsNonPermutation) {
  std::vector<int> bad = {0, 0, 2, 3, 4, 5, 6, 7, 8, 9};
  EXPECT_THROW(ndcg_at(bad, std::vector<int>(10, 1)), std::invalid_argument);
}

TEST(Ndcg, MatchesBruteForceOracleAndMaxima) {
  Rng rng(11);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<int> gains(10);
    for (auto& g : gains) g = static_cast<int>(rng.below(3));
    auto order = identity();
    rng.shuffle(std::span<int>(order));
    const double v = ndcg_at(order, gains);
    EXPECT_NEAR(v, oracle_ndcg(order, gains), 1e-12);
    EXPECT_LE(v, 1.0 + 1e-12);
    bool non_increasing = true;
    for (std::size_t i = 1; i < 10; ++i) {
      non_increasing &= gains[static_cast<std::size_t>(order[i])] <= gains[static_cast<std::size_t>(order[i - 1])];
    }
    if (non_increasing) EXPECT_NEAR(v, 1.0, 1e-12);
    else EXPECT_LT(v, 1.0 - 1e-12);
  }
}

TEST(Ndcg, TruncationIgnoresTail) {
  std::vector<int> gains(10, 0);
  gains[0] = 2;
  std::vector<int> order = {1, 2, 3, 4, 5, 6, 7, 8, 9, 0};
  EXPECT_EQ(ndcg_at(order, gains, 5), 0.0);
}

TEST(Ranking, TiesFallBackToBaseRank) {
  const std::vector<double> scores = {1, 1, 5, 1, 0, 0, 0, 0, 0, 2};
  const std::vector<int> base = {4, 3, 1, 2, 5, 6, 7, 8, 9, 10};
  EXPECT_EQ(rank_by_score(scores, base), (std::vector<int>{2, 9, 3, 1, 0, 4, 5, 6, 7, 8}));
}

TEST(Kendall, Fixtures) {
  const auto a = ids({1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  EXPECT_EQ(kendall_tau(a, a), 1.0);
  auto rev = a;
  std::reverse(rev.begin(), rev.end());
  EXPECT_EQ(kendall_tau(a, rev), -1.0);
  auto swap = a;
  std::swap(swap[4], swap[5]);
  EXPECT_EQ(kendall_tau(a, swap), 43.0 / 45.0);
}

TEST(Kendall, Antisymmetric) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::int64_t> a(10), b(10);
    std::iota(a.begin(), a.end(), 0);
    std::iota(b.begin(), b.end(), 0);
    rng.shuffle(std::span<std::int64_t>(a));
    rng.shuffle(std::span<std::int64_t>(b));
    auto rb = b;
    std::reverse(rb.begin(), rb.end());
    EXPECT_EQ(kendall_tau(a, rb), -kendall_tau(a, b));
    EXPECT_EQ(kendall_tau(a, b), kendall_tau(b, a));
  }
}

TEST(Kendall, MismatchedSetsThrow) {
  EXPECT_THROW(kendall_tau(ids({1, 2, 3}), ids({1, 2, 4})), std::invalid_argument);
  EXPECT_THROW(kendall_tau(ids({1, 1, 3}), ids({1, 3, 1})), std::invalid_argument);
}

TEST(EvaluateRun, BaseNegationReproducesBase) {
  std::vector<ScoreRow> rows;
  Rng rng(3);
  for (SessionId s = 1; s <= 20; ++s) {
    std::vector<int> gains(10);
    for (auto& g : gains) g = static_cast<int>(rng.below(3));
    std::vector<double> scores(10);
    for (std::size_t i = 0; i < 10; ++i) scores[i] = -static_cast<double>(i + 1);
    const auto r = target_rows(s, gains, scores);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  const auto report = evaluate_run(rows);
  ASSERT_EQ(report.queries.size(), 20u);
  double base_sum = 0;
  for (std::size_t q = 0; q < 20; ++q) {
    const auto& e = report.queries[q];
    EXPECT_EQ(e.tau, 1.0);
    EXPECT_EQ(e.delta_ndcg, 0.0);
    std::vector<int> gains;
    for (std::size_t i = 0; i < 10; ++i) gains.push_back(*rows[q * 10 + i].gain);
    base_sum += ndcg_at(identity(), gains);
  }
  EXPECT_NEAR(report.mean_base_ndcg, base_sum / 20.0, 1e-12);
  EXPECT_EQ(report.mean_delta, 0.0);
}

TEST(EvaluateRun, ReversalGivesTauMinusOne) {
  const auto rows = target_rows(1, {0, 0, 0, 0, 0, 0, 0, 0, 0, 2}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  const auto report = evaluate_run(rows);
  EXPECT_EQ(report.queries.at(0).tau, -1.0);
  EXPECT_EQ(report.queries.at(0).ndcg, 1.0);
  EXPECT_GT(report.queries.at(0).delta_ndcg, 0.0);
}

TEST(EvaluateRun, MissingDocumentNamesTarget) {
  auto rows = target_rows(77, {1, 0, 0, 0, 0, 0, 0, 0, 0, 0}, std::vector<double>(10, 0.0));
  rows.pop_back();
  try {
    evaluate_run(rows);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("77"), std::string::npos) << e.what();
  }
}

TEST(EvaluateRun, RoleFilterAndSplit) {
  auto rows = target_rows(1, {1, 0, 0, 0, 0, 0, 0, 0, 0, 0}, std::vector<double>(10, 0.0));
  auto other = target_rows(2, {0, 1, 0, 0, 0, 0, 0, 0, 0, 0}, std::vector<double>(10, 0.0));
  for (auto& r : other) r.role = Role::Test;
  rows.insert(rows.end(), other.begin(), other.end());
  EXPECT_EQ(evaluate_run(rows, Role::Test).queries.size(), 1u);
  const auto split = evaluate_run(rows, std::nullopt, 9);
  ASSERT_TRUE(split.split_means.has_value());
}

TEST(HistogramTest, BinsAndClamping) {
  const std::vector<double> v = {-1.0, -0.95, 0.0, 0.99, 1.0, 3.0};
  const auto h = histogram(v, -1.0, 1.0, 4);
  ASSERT_EQ(h.counts.size(), 4u);
  EXPECT_EQ(h.counts, (std::vector<std::int64_t>{2, 0, 1, 3}));
}
