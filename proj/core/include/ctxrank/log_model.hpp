#pragma once

// Challenge-format search logs: parsing, sessionization and dwell-time
// relevance labels.
//
// Line layout (tab separated):
//   SessionID  M  Day  UserID
//   SessionID  TimePassed  Q|T  SERPID  QueryID  Term,Term,...  URL,Domain x 10
//   SessionID  TimePassed  C  SERPID  URLID

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "ctxrank/common.hpp"

namespace ctxrank {

/// Relevance grade of one document in one impression. NoClick and R0 carry
/// the same gain; they stay distinct for label-distribution reports.
enum class Grade : std::uint8_t { NoClick = 0, R0 = 1, R1 = 2, R2 = 3 };

constexpr int gain(Grade g) noexcept {
  switch (g) {
    case Grade::R1:
      return 1;
    case Grade::R2:
      return 2;
    default:
      return 0;
  }
}

std::string_view grade_name(Grade g) noexcept;

/// Dwell thresholds, in the log's anonymous time units.
inline constexpr std::int64_t kDwellR1 = 50;
inline constexpr std::int64_t kDwellR2 = 400;

struct SessionMeta {
  SessionId session_id = 0;
  int day = 0;
  UserId user_id = 0;
  friend bool operator==(const SessionMeta&, const SessionMeta&) = default;
};

struct UrlDomain {
  ItemId url_id = 0;
  ItemId domain_id = 0;
  friend bool operator==(const UrlDomain&, const UrlDomain&) = default;
};

struct QueryAction {
  SessionId session_id = 0;
  std::int64_t time_passed = 0;
  SerpId serp_id = 0;
  bool is_test = false;
  QueryId query_id = 0;
  std::vector<TermId> terms;
  std::array<UrlDomain, kSerpSize> results{};
  friend bool operator==(const QueryAction&, const QueryAction&) = default;
};

struct ClickAction {
  SessionId session_id = 0;
  std::int64_t time_passed = 0;
  SerpId serp_id = 0;
  ItemId url_id = 0;
  friend bool operator==(const ClickAction&, const ClickAction&) = default;
};

using LogRecord = std::variant<SessionMeta, QueryAction, ClickAction>;

/// Parses one line. Accepts the 4-field metadata layout and a 5-field
/// variant carrying a (ignored) time column before the `M`.
LogRecord parse_line(std::string_view line, std::size_t line_no);

/// Parses a whole log; blank lines are skipped. Throws ParseError.
std::vector<LogRecord> parse_log(std::string_view text);
std::vector<LogRecord> parse_log(std::istream& in);
/// Plain or gzip file.
std::vector<LogRecord> parse_log_file(const std::filesystem::path& path);

std::string format_record(const LogRecord& record);
void write_log(std::ostream& out, std::span<const LogRecord> records);

struct Click {
  ItemId url_id = 0;
  std::int64_t time_passed = 0;
  /// Position of the click record within its session's record stream.
  std::uint32_t seq = 0;
  friend bool operator==(const Click&, const Click&) = default;
};

using Labels = std::array<Grade, kSerpSize>;

struct Impression {
  SerpId serp_id = 0;
  QueryId query_id = 0;
  std::int64_t time_passed = 0;
  std::uint32_t seq = 0;
  bool is_test = false;
  std::vector<TermId> terms;
  std::array<ItemId, kSerpSize> documents{};
  std::array<ItemId, kSerpSize> domains{};
  std::vector<Click> clicks;
  std::optional<Labels> labels;

  /// Search-engine rank (1-based) of the result at `position`.
  static constexpr int base_rank(std::size_t position) noexcept { return static_cast<int>(position) + 1; }
  /// Position of `url` in the result list, or -1.
  int position_of(ItemId url) const noexcept;
  bool has_relevant() const noexcept;
  std::array<int, kSerpSize> gains() const;
  /// Bit i set when result position i received at least one click.
  std::uint16_t clicked_mask() const noexcept;

  friend bool operator==(const Impression&, const Impression&) = default;
};

struct Session {
  SessionId session_id = 0;
  UserId user_id = 0;
  int day = 0;
  std::vector<Impression> impressions;

  const Impression* find(SerpId serp) const noexcept;
  friend bool operator==(const Session&, const Session&) = default;
};

/// Groups records into sessions (in order of their metadata record), attaches
/// clicks, and orders impressions and clicks by time. Throws DataError on
/// referential violations.
std::vector<Session> sessionize(std::span<const LogRecord> records);

/// Grades the 10 results of `imp`, which must belong to `session`.
Labels label_impression(const Impression& imp, const Session& session);
/// Fills `labels` for every impression in the session.
void label_session(Session& session);
void label_sessions(std::span<Session> sessions);

/// Inverse of sessionize: records in session order, actions in stream order.
std::vector<LogRecord> to_records(std::span<const Session> sessions);

/// Sessions with O(1) lookup by id.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Session> sessions);

  std::span<const Session> sessions() const noexcept { return sessions_; }
  const Session& session(SessionId id) const;
  const Session* find_session(SessionId id) const noexcept;
  const Impression& impression(SessionId session, SerpId serp) const;

 private:
  std::vector<Session> sessions_;
  std::unordered_map<SessionId, std::size_t> by_id_;
};

/// Versioned binary cache of labeled sessions.
void save_sessions(const std::filesystem::path& path, std::span<const Session> sessions);
std::vector<Session> load_sessions(const std::filesystem::path& path);

/// Dataset counts and label distributions.
struct LogStats {
  std::int64_t records = 0;
  std::int64_t unique_users = 0;
  std::int64_t unique_queries = 0;
  std::int64_t unique_documents = 0;
  std::int64_t training_sessions = 0;
  std::int64_t test_sessions = 0;
  std::int64_t impressions = 0;
  std::int64_t clicks = 0;
  std::int64_t training_clicks = 0;
  /// Indexed by Grade, over all labeled training-period impressions.
  std::array<std::int64_t, 4> training_labels{};
  std::array<std::int64_t, 4> test_period_labels{};
};

LogStats compute_stats(std::span<const Session> sessions, int train_days);

}  // namespace ctxrank
