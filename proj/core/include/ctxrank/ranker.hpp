#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ctxrank/common.hpp"
#include "ctxrank/features.hpp"
#include "ctxrank/partitioner.hpp"

namespace ctxrank {

enum class ModelKind : std::uint8_t { Heuristic, Regression, RankNet, ListNet };

std::string_view model_kind_name(ModelKind k) noexcept;
ModelKind parse_model_kind(std::string_view s);

/// Per-feature mean and standard deviation. Features with zero spread are
/// only centered.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> sd;

  static Standardizer fit(std::span<const double> rows, std::size_t dim);
  void apply(std::span<double> rows) const;
  std::size_t dim() const noexcept { return mean.size(); }
};

/// Feature rows grouped by target query, stored densely.
struct RankingData {
  std::size_t dim = kFeatureDim;
  std::vector<double> x;
  std::vector<int> gains;
  std::vector<int> base_ranks;
  /// Query q spans rows [offsets[q], offsets[q+1]).
  std::vector<std::size_t> offsets{0};

  std::size_t rows() const noexcept { return gains.size(); }
  std::size_t queries() const noexcept { return offsets.size() - 1; }
  std::span<const double> row(std::size_t i) const noexcept { return {x.data() + i * dim, dim}; }
};

/// Rows of `role` (or all rows), grouped by target. Unlabeled rows get gain 0
/// when `require_gains` is false; otherwise they raise DataError.
RankingData make_ranking_data(std::span<const FeatureRow> rows, std::optional<Role> role, bool require_gains);

/// inputs -> hidden tanh units -> one linear output.
class Network {
 public:
  Network() = default;
  Network(std::size_t inputs, std::size_t hidden);

  /// Uniform in [-a, a] with a = sqrt(6 / (fan_in + fan_out)); biases zero.
  void init(std::uint64_t seed);

  double forward(std::span<const double> x) const;

  std::size_t inputs() const noexcept { return inputs_; }
  std::size_t hidden() const noexcept { return hidden_; }
  /// Flat parameter vector: W1 (hidden x inputs, row major), b1, w2, b2.
  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }

  /// Adds d(sum_i ds[i] * s_i)/d(params) to `grad` for the rows of `x`.
  void backward(std::span<const double> x, std::size_t n_rows, std::span<const double> dscore,
                std::span<double> grad) const;
  /// Scores `n_rows` rows of `x`.
  void forward_rows(std::span<const double> x, std::size_t n_rows, std::span<double> scores) const;

 private:
  std::size_t inputs_ = 0;
  std::size_t hidden_ = 0;
  std::vector<double> params_;
};

/// Per-query objectives over scores. When `grad` is non-empty it receives
/// d(loss)/d(score).
///
/// Regression: mean squared error against the gains.
double regression_loss(std::span<const double> scores, std::span<const int> gains, std::span<double> grad = {});
/// RankNet: sum over pairs with gain_i > gain_j of log(1 + exp(-(s_i - s_j))).
double ranknet_loss(std::span<const double> scores, std::span<const int> gains, std::span<double> grad = {});
/// ListNet: cross-entropy between the top-one distributions softmax(gains)
/// and softmax(scores).
double listnet_loss(std::span<const double> scores, std::span<const int> gains, std::span<double> grad = {});

double query_loss(ModelKind kind, std::span<const double> scores, std::span<const int> gains,
                  std::span<double> grad = {});

/// Mean query loss of `net` over the queries `batch` of (already
/// standardized) `data`. When `grad` is non-empty (size of params) it is
/// overwritten with the gradient. Each query's gradient is computed into its
/// own buffer and reduced in batch order, so the result does not depend on
/// `threads`.
double batch_objective(const Network& net, ModelKind kind, const RankingData& data, std::span<const std::size_t> batch,
                       std::span<double> grad, unsigned threads = 1);

struct TrainParams {
  std::size_t hidden = 64;
  double learning_rate = 0.03;
  int max_epochs = 200;
  int patience = 10;
  std::size_t batch_queries = 100;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

struct RankModel {
  ModelKind kind = ModelKind::Heuristic;
  Network network;
  Standardizer standardizer;
  TrainParams params;
  int epochs_run = 0;
  int best_epoch = 0;
  double best_validation_ndcg = 0.0;
};

/// Documents ordered by C1 total relevance (g1), base rank breaking ties.
std::vector<int> heuristic_rerank(std::span<const double> c1_g1, std::span<const int> base_ranks);

/// Fits the standardizer on `train`, then runs mini-batch gradient descent
/// over batches of `batch_queries` queries, keeping the weights of the epoch
/// with the best validation NDCG@10. Heuristic models need no fitting.
RankModel train(ModelKind kind, const RankingData& train, const RankingData& validation, const TrainParams& params);

/// Scores rows in input order. Throws DataError on a feature-count mismatch.
std::vector<double> score(const RankModel& model, const RankingData& data);

/// Mean NDCG@10 of `scores` over the queries of `data`.
double mean_ndcg(const RankingData& data, std::span<const double> scores);

/// JSON model file.
void save_model(const std::filesystem::path& path, const RankModel& model);
RankModel load_model(const std::filesystem::path& path);

}  // namespace ctxrank
