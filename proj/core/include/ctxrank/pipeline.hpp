#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ctxrank/blender.hpp"
#include "ctxrank/config.hpp"
#include "ctxrank/evaluator.hpp"
#include "ctxrank/partitioner.hpp"
#include "ctxrank/ranker.hpp"
#include "ctxrank/synthgen.hpp"

namespace ctxrank {

/// Effective settings for one pipeline command. Built from a key = value
/// config with overrides already merged in.
///
///   work_dir            directory for default artifact names
///   train_days          last day of the training period (27)
///   truncation          NDCG cut-off (10)
///   threads             worker cap, 0 = all cores
///   seed.partition      same-day session ordering
///   seed.train          weight init and batch shuffling
///   seed.blend          validation split for learned blends
///   seed.eval           public/private split in reports
///   train.hidden, train.learning_rate, train.max_epochs, train.patience,
///   train.batch_queries
///   blend.learning_rate, blend.iterations
///   gen.*               synthetic generator (see GenConfig)
struct PipelineConfig {
  KeyValueConfig effective;
  std::filesystem::path work_dir = "work";
  int train_days = 27;
  int truncation = kDefaultTruncation;
  unsigned threads = 1;
  std::uint64_t partition_seed = 1;
  std::uint64_t train_seed = 1;
  std::uint64_t blend_seed = 1;
  std::uint64_t eval_seed = 1;
  TrainParams train;
  LearnedBlendParams blend;
  GenConfig gen;

  /// Throws ConfigError on invalid values.
  static PipelineConfig from(const KeyValueConfig& cfg);

  /// Default artifact paths inside work_dir.
  std::filesystem::path log_path() const { return work_dir / "log.tsv"; }
  std::filesystem::path sessions_path() const { return work_dir / "sessions.bin"; }
  std::filesystem::path targets_path() const { return work_dir / "targets.csv"; }
  std::filesystem::path index_path() const { return work_dir / "index.bin"; }
  std::filesystem::path features_path() const { return work_dir / "features.csv"; }
  std::filesystem::path model_path(ModelKind k) const;
  std::filesystem::path scores_path(ModelKind k) const;
  std::filesystem::path blend_path() const { return work_dir / "blend.json"; }
  std::filesystem::path blend_scores_path() const { return work_dir / "scores_blend.csv"; }
  std::filesystem::path report_dir() const { return work_dir / "report"; }
  std::filesystem::path stats_path() const { return work_dir / "stats.csv"; }
};

/// Sidecar `<artifact>.manifest.json`: command, inputs with fingerprints,
/// seeds, effective config, outputs and wall time.
struct RunManifest {
  std::string command;
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;
  std::vector<std::pair<std::string, std::string>> results;
  double wall_seconds = 0.0;
};
std::filesystem::path manifest_path(const std::filesystem::path& artifact);
void write_manifest(const std::filesystem::path& artifact, const RunManifest& run, const PipelineConfig& cfg);

GenStats run_gen(const PipelineConfig& cfg, const std::filesystem::path& out);
/// Parses, sessionizes and labels a log into the binary session cache.
std::size_t run_parse(const PipelineConfig& cfg, const std::filesystem::path& log, const std::filesystem::path& out);
TargetSet run_partition(const PipelineConfig& cfg, const std::filesystem::path& sessions,
                        const std::filesystem::path& out);
void run_index(const PipelineConfig& cfg, const std::filesystem::path& sessions, const std::filesystem::path& out);
/// Prints the indexed occurrences of `query`.
void run_lookup(const std::filesystem::path& index, QueryId query, std::ostream& out);
std::size_t run_extract(const PipelineConfig& cfg, const std::filesystem::path& sessions,
                        const std::filesystem::path& targets, const std::filesystem::path& index,
                        const std::filesystem::path& out);
/// Trains on Train rows, early-stops on Validation rows.
RankModel run_train(const PipelineConfig& cfg, ModelKind kind, const std::filesystem::path& features,
                    const std::filesystem::path& out);
void run_score(const PipelineConfig& cfg, const std::filesystem::path& model, const std::filesystem::path& features,
               const std::filesystem::path& out);
BlendModel run_blend(const PipelineConfig& cfg, BlendMethod method, const std::vector<std::filesystem::path>& scores,
                     const std::filesystem::path& manifest_out, const std::filesystem::path& scores_out);
/// Writes queries.csv and summary.csv into `out_dir`.
EvalReport run_eval(const PipelineConfig& cfg, const std::filesystem::path& scores, std::optional<Role> role,
                    const std::filesystem::path& out_dir);
/// Writes Kendall tau and delta-NDCG histograms (tau.csv, delta_ndcg.csv)
/// into `out_dir`.
EvalReport run_analyze(const PipelineConfig& cfg, const std::filesystem::path& scores, std::optional<Role> role,
                       std::size_t bins, const std::filesystem::path& out_dir);
/// Dataset counts and label distributions as key,value CSV.
LogStats run_stats(const PipelineConfig& cfg, const std::filesystem::path& sessions, const std::filesystem::path& out);

}  // namespace ctxrank
