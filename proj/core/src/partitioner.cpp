#include "ctxrank/partitioner.hpp"

#include <algorithm>
#include <ostream>

#include "ctxrank/io.hpp"
#include "ctxrank/random.hpp"

namespace ctxrank {

std::string_view role_name(Role r) noexcept {
  switch (r) {
    case Role::Train:
      return "train";
    case Role::Validation:
      return "validation";
    case Role::Test:
      return "test";
  }
  return "?";
}

Role parse_role(std::string_view s) {
  if (s == "train") return Role::Train;
  if (s == "validation") return Role::Validation;
  if (s == "test") return Role::Test;
  throw DataError("unknown role '" + std::string(s) + "'");
}

SessionOrder SessionOrder::build(std::span<const Session> sessions, std::uint64_t seed) {
  SessionOrder order;
  order.seed_ = seed;
  for (const auto& s : sessions) order.timelines_[s.user_id].push_back(&s);
  order.users_.reserve(order.timelines_.size());
  for (auto& [user, list] : order.timelines_) {
    order.users_.push_back(user);
    // Input order must not leak into the result: sort by id first.
    std::sort(list.begin(), list.end(), [](const Session* a, const Session* b) {
      return std::tie(a->day, a->session_id) < std::tie(b->day, b->session_id);
    });
    Rng rng(hash_combine(seed, static_cast<std::uint64_t>(user)));
    for (std::size_t begin = 0; begin < list.size();) {
      std::size_t end = begin + 1;
      while (end < list.size() && list[end]->day == list[begin]->day) ++end;
      if (end - begin > 1) rng.shuffle(std::span<const Session*>(list.data() + begin, end - begin));
      for (std::size_t i = begin; i < end; ++i) {
        order.positions_[list[i]->session_id] = {list[i]->day, static_cast<int>(i - begin)};
      }
      begin = end;
    }
  }
  std::sort(order.users_.begin(), order.users_.end());
  return order;
}

SessionPosition SessionOrder::position(SessionId id) const {
  auto it = positions_.find(id);
  if (it == positions_.end()) throw DataError("session " + std::to_string(id) + " not in session order");
  return it->second;
}

std::span<const Session* const> SessionOrder::timeline(UserId user) const {
  auto it = timelines_.find(user);
  if (it == timelines_.end()) return {};
  return it->second;
}

std::vector<TargetRef> TargetSet::all() const {
  std::vector<TargetRef> out;
  out.reserve(train.size() + validation.size() + test.size());
  out.insert(out.end(), train.begin(), train.end());
  out.insert(out.end(), validation.begin(), validation.end());
  out.insert(out.end(), test.begin(), test.end());
  std::stable_sort(out.begin(), out.end(), [](const TargetRef& a, const TargetRef& b) {
    return std::tie(a.user_id, a.role) < std::tie(b.user_id, b.role);
  });
  return out;
}

TargetSet select_targets(const SessionOrder& order, int train_days, std::span<const UserId> roster) {
  TargetSet set;
  for (UserId u : roster) {
    if (order.timeline(u).empty()) ++set.skipped_users;
  }
  for (UserId user : order.users()) {
    const auto timeline = order.timeline(user);

    for (auto it = timeline.rbegin(); it != timeline.rend(); ++it) {
      const Session& s = **it;
      if (s.day > train_days) continue;
      auto imp = std::find_if(s.impressions.rbegin(), s.impressions.rend(),
                              [](const Impression& i) { return i.has_relevant(); });
      if (imp != s.impressions.rend()) {
        set.train.push_back({Role::Train, user, s.session_id, imp->serp_id});
        break;
      }
    }

    const Session* test_session = nullptr;
    std::size_t test_pos = 0;
    for (auto it = timeline.rbegin(); it != timeline.rend() && test_session == nullptr; ++it) {
      const auto& imps = (*it)->impressions;
      for (std::size_t i = imps.size(); i-- > 0;) {
        if (imps[i].is_test) {
          test_session = *it;
          test_pos = i;
          break;
        }
      }
    }
    if (test_session == nullptr) {
      for (auto it = timeline.rbegin(); it != timeline.rend(); ++it) {
        if ((*it)->day > train_days && !(*it)->impressions.empty()) {
          test_session = *it;
          test_pos = (*it)->impressions.size() - 1;
          break;
        }
      }
    }
    if (test_session == nullptr) continue;
    set.test.push_back({Role::Test, user, test_session->session_id, test_session->impressions[test_pos].serp_id});
    for (std::size_t i = test_pos; i-- > 0;) {
      if (test_session->impressions[i].has_relevant()) {
        set.validation.push_back({Role::Validation, user, test_session->session_id,
                                  test_session->impressions[i].serp_id});
        break;
      }
    }
  }
  return set;
}

TargetSet select_targets(std::span<const Session> sessions, int train_days, std::uint64_t seed) {
  return select_targets(SessionOrder::build(sessions, seed), train_days);
}

void write_targets(const std::filesystem::path& path, const TargetSet& targets) {
  io::atomic_write(path, [&](std::ostream& out) {
    out << "role,user_id,session_id,serp_id\n";
    for (const auto& t : targets.all()) {
      out << role_name(t.role) << ',' << t.user_id << ',' << t.session_id << ',' << t.serp_id << '\n';
    }
  });
}

TargetSet read_targets(const std::filesystem::path& path) {
  const std::string text = io::read_text(path);
  TargetSet set;
  std::size_t line_no = 0;
  for (auto line : io::split(text, '\n')) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "role,user_id,session_id,serp_id") throw ParseError(1, path.string() + ": bad targets header");
      continue;
    }
    const auto f = io::split(line, ',');
    if (f.size() != 4) throw ParseError(line_no, path.string() + ": expected 4 columns");
    try {
      TargetRef t{parse_role(f[0]), io::parse_int(f[1], "user_id"), io::parse_int(f[2], "session_id"),
                  io::parse_int(f[3], "serp_id")};
      (t.role == Role::Train ? set.train : t.role == Role::Validation ? set.validation : set.test).push_back(t);
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(line_no, path.string() + ": " + e.what());
    }
  }
  return set;
}

}  // namespace ctxrank
