#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctxrank/common.hpp"
#include "ctxrank/context_index.hpp"
#include "ctxrank/log_model.hpp"
#include "ctxrank/partitioner.hpp"

namespace ctxrank {

inline constexpr std::size_t kFeaturesPerContext = 20;
inline constexpr std::size_t kBaseRankFeature = kNumContexts * kFeaturesPerContext;
/// 20 context features for each of the six contexts, then the base rank.
inline constexpr std::size_t kFeatureDim = kBaseRankFeature + 1;

/// Intersection over union of two term lists, treated as sets. Two empty
/// lists give 0.
double sim(std::span<const TermId> a, std::span<const TermId> b);
/// Same, for sorted de-duplicated inputs.
double sim_sorted(std::span<const TermId> a, std::span<const TermId> b) noexcept;

/// How an item fared in one impression. Ranks are 1-based, 0 when the flag
/// does not hold. When the item fills several slots (possible for domains),
/// its top slot determines the ranks.
struct EventFlags {
  bool shown = false;
  bool clicked = false;
  /// Shown, not clicked, and some click landed below it.
  bool skipped = false;
  /// Shown, not clicked, and every click landed above it.
  bool missed = false;
  int r_shown = 0;
  int r_clicked = 0;
  int r_skipped = 0;
  int r_missed = 0;
};

EventFlags event_flags(ItemId item, std::span<const ItemId, kSerpSize> items, std::uint16_t clicked_mask) noexcept;

using ContextFeatures = std::array<double, kFeaturesPerContext>;

/// g1..g20 for `item` against one context. `query_terms` must be sorted and
/// de-duplicated. Missing evidence yields 0.
///
///   g1  total gain over matching slots     g2  g1 / matching slots
///   g3  max slot gain                      g4  min slot gain
///   g5  mean sim where clicked             g6  max sim where clicked
///   g7  mean sim where skipped             g8  max sim where skipped
///   g9  mean sim where missed              g10 max sim where missed
///   g11 #shown   g12 #clicked   g13 #skipped   g14 #missed
///   g15 sum 1/r_shown                      g16 sum 1/r_clicked
///   g17 max r_clicked                      g18 min r_clicked
///   g19 sum 1/r_skipped                    g20 sum 1/r_missed
ContextFeatures context_features(ItemId item, std::span<const TermId> query_terms, const Context& context);

struct FeatureVector {
  UserId user_id = 0;
  QueryId query_id = 0;
  ItemId doc_id = 0;
  std::array<double, kFeatureDim> values{};
  std::optional<int> gain;

  /// Feature j (1-based) of context k (1-based).
  double g(std::size_t context, std::size_t j) const noexcept {
    return values[(context - 1) * kFeaturesPerContext + (j - 1)];
  }
  int base_rank() const noexcept { return static_cast<int>(values[kBaseRankFeature]); }
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

/// Feature vectors for the ten results of `target`, in result order.
std::array<FeatureVector, kSerpSize> extract(const Impression& target, UserId user, const ContextSet& contexts);

/// A feature vector tagged with the target it belongs to.
struct FeatureRow {
  Role role = Role::Train;
  SessionId session_id = 0;
  SerpId serp_id = 0;
  FeatureVector features;
  friend bool operator==(const FeatureRow&, const FeatureRow&) = default;
};

/// Extracts all targets, ordered by user then role; ten rows per target.
/// `threads` == 0 uses the hardware concurrency.
std::vector<FeatureRow> extract_targets(const Corpus& corpus, const SessionOrder& order, const ContextIndex& index,
                                        const TargetSet& targets, unsigned threads = 1);

/// Column names c{k}_g{j}, then base_rank.
std::vector<std::string> feature_names();

/// CSV: role,user_id,session_id,serp_id,query_id,doc_id,<features>,gain.
/// Unknown gains are written as an empty field.
void write_features(const std::filesystem::path& path, std::span<const FeatureRow> rows);
std::vector<FeatureRow> read_features(const std::filesystem::path& path);

}  // namespace ctxrank
