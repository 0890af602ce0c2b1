#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ctxrank/common.hpp"
#include "ctxrank/log_model.hpp"

namespace ctxrank {

enum class Role : std::uint8_t { Train = 0, Validation = 1, Test = 2 };

std::string_view role_name(Role r) noexcept;
Role parse_role(std::string_view s);

/// Chronological position of a session within its user's history. Sessions on
/// the same day are ordered by a seeded shuffle since the logs carry no
/// timestamps across sessions.
struct SessionPosition {
  int day = 0;
  int rank_in_day = 0;
};

class SessionOrder {
 public:
  /// Sorts every user's sessions by day, resolving same-day ties with an RNG
  /// stream derived from (seed, user_id).
  static SessionOrder build(std::span<const Session> sessions, std::uint64_t seed);

  SessionPosition position(SessionId id) const;
  /// The user's sessions in chronological order.
  std::span<const Session* const> timeline(UserId user) const;
  /// Users sorted ascending.
  const std::vector<UserId>& users() const noexcept { return users_; }
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_ = 0;
  std::vector<UserId> users_;
  std::unordered_map<UserId, std::vector<const Session*>> timelines_;
  std::unordered_map<SessionId, SessionPosition> positions_;
};

struct TargetRef {
  Role role = Role::Train;
  UserId user_id = 0;
  SessionId session_id = 0;
  SerpId serp_id = 0;
  friend bool operator==(const TargetRef&, const TargetRef&) = default;
};

struct TargetSet {
  std::vector<TargetRef> train;
  std::vector<TargetRef> validation;
  std::vector<TargetRef> test;
  /// Users that had no sessions at all.
  std::int64_t skipped_users = 0;

  /// All targets sorted by user, then role.
  std::vector<TargetRef> all() const;
  friend bool operator==(const TargetSet&, const TargetSet&) = default;
};

/// Per user: the training target is the last impression in the training
/// period with a relevant result; the test target is the `T` impression (or
/// the last impression of the last test-period session when none is
/// flagged); the validation target is the last relevant impression before
/// the test target inside the test session. Users listed in `roster` that
/// have no sessions are counted in `skipped_users`.
TargetSet select_targets(const SessionOrder& order, int train_days, std::span<const UserId> roster = {});
TargetSet select_targets(std::span<const Session> sessions, int train_days, std::uint64_t seed);

/// CSV with header `role,user_id,session_id,serp_id`.
void write_targets(const std::filesystem::path& path, const TargetSet& targets);
TargetSet read_targets(const std::filesystem::path& path);

}  // namespace ctxrank
