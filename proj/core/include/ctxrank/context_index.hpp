#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <span>
#include <unordered_map>
#include <vector>

#include "ctxrank/common.hpp"
#include "ctxrank/log_model.hpp"
#include "ctxrank/partitioner.hpp"

namespace ctxrank {

/// Chronological key of an impression within its user's history.
struct OrderKey {
  int day = 0;
  int session_rank = 0;
  int position = 0;
  friend auto operator<=>(const OrderKey&, const OrderKey&) = default;
};

OrderKey order_key(const SessionOrder& order, const Session& session, std::size_t position);

/// One logged impression as seen by the feature extractor.
struct Occurrence {
  UserId user_id = 0;
  SessionId session_id = 0;
  SerpId serp_id = 0;
  QueryId query_id = 0;
  OrderKey key;
  /// Sorted, de-duplicated.
  std::vector<TermId> terms;
  std::array<ItemId, kSerpSize> documents{};
  std::array<ItemId, kSerpSize> domains{};
  std::array<std::int8_t, kSerpSize> gains{};
  std::uint16_t clicked_mask = 0;

  bool clicked(std::size_t position) const noexcept { return (clicked_mask >> position) & 1u; }
  friend bool operator==(const Occurrence&, const Occurrence&) = default;
};

Occurrence make_occurrence(const Session& session, std::size_t position, OrderKey key);

enum class ItemKind : std::uint8_t { Document, Domain };

/// A set of past impressions viewed through either their document or their
/// domain lists.
struct Context {
  ItemKind kind = ItemKind::Document;
  std::vector<const Occurrence*> entries;

  std::span<const ItemId, kSerpSize> items(const Occurrence& occ) const noexcept {
    return kind == ItemKind::Document ? std::span<const ItemId, kSerpSize>(occ.documents)
                                      : std::span<const ItemId, kSerpSize>(occ.domains);
  }
};

inline constexpr std::size_t kNumContexts = 6;
using ContextSet = std::array<Context, kNumContexts>;

/// Item kind of context k (0-based): even k are document contexts.
constexpr ItemKind context_kind(std::size_t k) noexcept { return k % 2 == 0 ? ItemKind::Document : ItemKind::Domain; }

/// Inverted query index plus per-user histories over the training period.
/// Immutable after build; safe to share across threads.
class ContextIndex {
 public:
  ContextIndex() = default;

  /// Indexes every impression of every session with day <= train_days.
  static ContextIndex build(std::span<const Session> sessions, const SessionOrder& order, int train_days);

  std::span<const Occurrence> occurrences() const noexcept { return occurrences_; }
  /// Occurrences of `query` ordered by (day, session_id, position).
  std::vector<const Occurrence*> lookup(QueryId query) const;
  std::span<const std::uint32_t> query_postings(QueryId query) const noexcept;
  /// The user's occurrences in chronological order.
  std::span<const std::uint32_t> user_postings(UserId user) const noexcept;

  int train_days() const noexcept { return train_days_; }
  std::uint64_t order_seed() const noexcept { return order_seed_; }

  void save(const std::filesystem::path& path) const;
  static ContextIndex load(const std::filesystem::path& path);

 private:
  void rebuild_postings();

  int train_days_ = 0;
  std::uint64_t order_seed_ = 0;
  std::vector<Occurrence> occurrences_;
  std::unordered_map<QueryId, std::vector<std::uint32_t>> by_query_;
  std::unordered_map<UserId, std::vector<std::uint32_t>> by_user_;
};

/// C1/C2: the user's earlier repetitions of `query`; C3/C4: the user's
/// earlier other queries; C5/C6: indexed repetitions of `query` by other
/// users. Odd contexts use document lists, even ones domain lists.
ContextSet assemble_contexts(const ContextIndex& index, UserId user, QueryId query, OrderKey target);

}  // namespace ctxrank
