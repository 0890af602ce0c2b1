#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "ctxrank/config.hpp"

namespace ctxrank {

/// Synthetic challenge-format log generator with planted user preferences.
///
/// Each user has a few topics of interest; queries, documents and domains are
/// partitioned by topic. A user prefers some documents per query and some
/// domains per topic. The engine's base ranking ignores preferences, clicks
/// are simulated top-down, and with probability `preference_strength` clicks
/// on preferred results get long (>= 400 unit) dwell times.
struct GenConfig {
  std::int64_t n_users = 4000;
  int n_days = 30;
  int queries_per_user_per_day = 3;
  std::int64_t n_queries = 2000;
  std::int64_t n_terms = 5000;
  std::int64_t n_documents = 20000;
  std::int64_t n_domains = 2000;
  std::int64_t n_topics = 50;
  double preference_strength = 0.9;
  double repeat_query_prob = 0.5;
  /// Probability that a user searches on a given training day.
  double activity_prob = 0.6;
  /// Drop test-period sessions that do not contain the test query.
  bool prune_test_period = true;
  std::uint64_t rng_seed = 7;

  /// The last three days form the test period.
  int train_days() const noexcept { return n_days - 3; }
  /// Throws ConfigError.
  void validate() const;

  /// Reads `gen.*` keys (e.g. `gen.n_users`), falling back to `defaults`.
  static GenConfig from_config(const KeyValueConfig& cfg, const GenConfig& defaults);
  static GenConfig from_config(const KeyValueConfig& cfg);
  void to_config(KeyValueConfig& cfg) const;
};

/// Ground-truth counts recorded while generating.
struct GenStats {
  std::int64_t records = 0;
  std::int64_t sessions = 0;
  std::int64_t training_sessions = 0;
  std::int64_t test_sessions = 0;
  std::int64_t impressions = 0;
  std::int64_t test_queries = 0;
  std::int64_t clicks = 0;
  std::int64_t training_clicks = 0;
  std::int64_t users = 0;
  std::int64_t unique_queries = 0;
  std::int64_t unique_documents = 0;
};

/// Writes the log to `out`. Same config, same bytes.
GenStats generate(const GenConfig& config, std::ostream& out);

/// Whether `user` prefers document `doc` (returned for `query`). Exposed so
/// tests can inspect the planted signal.
bool planted_preference(const GenConfig& config, std::int64_t user, std::int64_t query, std::int64_t doc);

}  // namespace ctxrank
