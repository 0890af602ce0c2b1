#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ctxrank/common.hpp"
#include "ctxrank/partitioner.hpp"

namespace ctxrank {

/// One scored document of one target.
struct ScoreRow {
  Role role = Role::Train;
  UserId user_id = 0;
  SessionId session_id = 0;
  SerpId serp_id = 0;
  QueryId query_id = 0;
  ItemId doc_id = 0;
  int base_rank = 0;
  std::optional<int> gain;
  double score = 0.0;
  friend bool operator==(const ScoreRow&, const ScoreRow&) = default;
};

/// CSV: role,user_id,session_id,serp_id,query_id,doc_id,base_rank,gain,score
void write_scores(const std::filesystem::path& path, std::span<const ScoreRow> rows);
std::vector<ScoreRow> read_scores(const std::filesystem::path& path);

/// Row boundaries of consecutive runs sharing a target. Returns offsets
/// [0, ..., rows.size()]. Throws DataError if a target's rows are split
/// across non-adjacent runs.
template <typename Row, typename KeyFn>
std::vector<std::size_t> group_offsets(std::span<const Row> rows, KeyFn key) {
  std::vector<std::size_t> offsets{0};
  using Key = decltype(key(rows[0]));
  std::set<Key> seen;
  for (std::size_t i = 1; i <= rows.size(); ++i) {
    if (i == rows.size() || key(rows[i]) != key(rows[i - 1])) {
      if (!seen.insert(key(rows[i - 1])).second) {
        throw DataError("rows of one target are not contiguous (row " + std::to_string(i - 1) + ")");
      }
      offsets.push_back(i);
    }
  }
  return offsets;
}

std::vector<std::size_t> target_offsets(std::span<const ScoreRow> rows);

}  // namespace ctxrank
