#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "ctxrank/common.hpp"
#include "ctxrank/partitioner.hpp"
#include "ctxrank/score_file.hpp"

namespace ctxrank {

inline constexpr int kDefaultTruncation = 10;

/// Document indices sorted by descending score; equal scores keep ascending
/// base rank. This is the only ranking rule used anywhere in the pipeline.
std::vector<int> rank_by_score(std::span<const double> scores, std::span<const int> base_ranks);

/// NDCG@T of a ranking. `order[i]` is the index (into `gains`) of the
/// document placed at position i+1. Gain of a document is 2^label - 1,
/// discounted by log2(position + 1). A list whose ideal DCG is zero scores 1.
/// Throws std::invalid_argument if `order` is not a permutation.
double ndcg_at(std::span<const int> order, std::span<const int> gains, int truncation = kDefaultTruncation);

/// (concordant - discordant) / (n choose 2) between two rankings of the same
/// items, each listed best first. Throws std::invalid_argument if the item
/// sets differ or contain duplicates.
double kendall_tau(std::span<const std::int64_t> a, std::span<const std::int64_t> b);

struct QueryEval {
  Role role = Role::Train;
  UserId user_id = 0;
  SessionId session_id = 0;
  SerpId serp_id = 0;
  double ndcg = 0.0;
  double base_ndcg = 0.0;
  double delta_ndcg = 0.0;
  double tau = 0.0;
};

struct EvalReport {
  std::vector<QueryEval> queries;
  double mean_ndcg = 0.0;
  double mean_base_ndcg = 0.0;
  double mean_delta = 0.0;
  double frac_tau_at_least_07 = 0.0;
  /// Means over a seeded 50/50 split of queries (public/private analog).
  std::optional<std::pair<double, double>> split_means;
};

/// Scores every target present in `rows` (optionally only one role). Rows of
/// a target must be contiguous and cover base ranks 1..10 with known gains.
EvalReport evaluate_run(std::span<const ScoreRow> rows, std::optional<Role> role = std::nullopt,
                        std::optional<std::uint64_t> split_seed = std::nullopt,
                        int truncation = kDefaultTruncation);

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::int64_t> counts;
};

/// Equal-width bins over [lo, hi]; values outside are clamped into the end bins.
Histogram histogram(std::span<const double> values, double lo, double hi, std::size_t bins);

void write_report_csv(const std::filesystem::path& path, const EvalReport& report);
/// key,value lines.
void write_summary(const std::filesystem::path& path, const EvalReport& report);
/// bin_lo,bin_hi,count lines.
void write_histogram(const std::filesystem::path& path, const Histogram& h);

}  // namespace ctxrank
