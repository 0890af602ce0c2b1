#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctxrank/common.hpp"

namespace ctxrank {

enum class BlendMethod : std::uint8_t { Average, Learned };

std::string_view blend_method_name(BlendMethod m) noexcept;
BlendMethod parse_blend_method(std::string_view s);

/// Mean and sd of one member's scores over the blending pool (sd 0 -> 1).
struct ScoreStats {
  double mean = 0.0;
  double sd = 1.0;
  static ScoreStats fit(std::span<const double> scores);
  double apply(double s) const noexcept { return (s - mean) / sd; }
};

/// One score vector per member, all aligned to the same documents.
using MemberScores = std::vector<std::vector<double>>;

/// Query structure of the pool: rows [offsets[q], offsets[q+1]) form query q.
/// Queries with `fit_eligible[q]` are labeled validation targets usable for
/// fitting learned weights.
struct BlendPool {
  std::vector<int> gains;
  std::vector<int> base_ranks;
  std::vector<std::size_t> offsets{0};
  std::vector<bool> fit_eligible;
  std::size_t queries() const noexcept { return offsets.size() - 1; }
};

struct LearnedBlendParams {
  double learning_rate = 0.1;
  int iterations = 1000;
};

struct BlendModel {
  BlendMethod method = BlendMethod::Average;
  std::vector<std::string> members;
  std::vector<ScoreStats> standardizers;
  std::vector<double> weights;
  double bias = 0.0;
  // Learned blends only.
  std::uint64_t split_seed = 0;
  LearnedBlendParams params;
  std::size_t fit_queries = 0;
  std::size_t holdout_queries = 0;
  double holdout_ndcg_learned = 0.0;
  double holdout_ndcg_average = 0.0;
  /// Each member alone on the holdout half.
  std::vector<double> holdout_ndcg_members;
};

/// Throws DataError unless every member has the same number of scores.
std::size_t check_aligned(const MemberScores& members);

/// Standardizes each member over the pool and takes the unweighted mean.
std::vector<double> blend_average(const MemberScores& members);

/// Uniform-weight model with pool standardizers.
BlendModel fit_average(const MemberScores& members, std::vector<std::string> names);

/// Splits the eligible queries 50/50 by `split_seed`, fits linear RankNet
/// weights on the standardized member scores of the first half by full-batch
/// gradient descent from zero, and reports NDCG@10 of the learned and the
/// average blend on the second half.
BlendModel blend_learned(const MemberScores& members, std::vector<std::string> names, const BlendPool& pool,
                         std::uint64_t split_seed, const LearnedBlendParams& params = {});

std::vector<double> apply_blend(const BlendModel& model, const MemberScores& members);

/// JSON manifest listing members, standardizers and weights.
void save_blend(const std::filesystem::path& path, const BlendModel& model);
BlendModel load_blend(const std::filesystem::path& path);

}  // namespace ctxrank
