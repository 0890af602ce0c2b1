#pragma once

// Fixture builders and brute-force oracles shared by the unit and
// acceptance tests. Oracles deliberately avoid the library's index and
// feature code paths.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ctxrank/context_index.hpp"
#include "ctxrank/features.hpp"
#include "ctxrank/log_model.hpp"
#include "ctxrank/partitioner.hpp"
#include "ctxrank/random.hpp"
#include "ctxrank/synthgen.hpp"

namespace ctxrank::testing {

inline std::string meta_line(SessionId sid, int day, UserId user) {
  return std::to_string(sid) + "\tM\t" + std::to_string(day) + "\t" + std::to_string(user) + "\n";
}

/// Documents base..base+9 on domains base/10.
inline std::string query_line(SessionId sid, std::int64_t time, SerpId serp, QueryId query,
                              const std::vector<TermId>& terms, ItemId doc_base = 100, bool test = false) {
  std::string s = std::to_string(sid) + "\t" + std::to_string(time) + (test ? "\tT\t" : "\tQ\t") +
                  std::to_string(serp) + "\t" + std::to_string(query) + "\t";
  for (std::size_t i = 0; i < terms.size(); ++i) s += (i ? "," : "") + std::to_string(terms[i]);
  for (ItemId d = doc_base; d < doc_base + 10; ++d) s += "\t" + std::to_string(d) + "," + std::to_string(d / 10);
  return s + "\n";
}

inline std::string click_line(SessionId sid, std::int64_t time, SerpId serp, ItemId url) {
  return std::to_string(sid) + "\t" + std::to_string(time) + "\tC\t" + std::to_string(serp) + "\t" +
         std::to_string(url) + "\n";
}

inline std::vector<Session> labeled_sessions(const std::string& text) {
  auto sessions = sessionize(parse_log(text));
  label_sessions(sessions);
  return sessions;
}

inline GenConfig small_config(std::int64_t users, std::uint64_t seed = 7) {
  GenConfig c;
  c.n_users = users;
  c.rng_seed = seed;
  return c;
}

inline std::string generate_text(const GenConfig& c) {
  std::ostringstream out;
  generate(c, out);
  return out.str();
}

inline std::vector<Session> generated_sessions(const GenConfig& c) { return labeled_sessions(generate_text(c)); }

// ---------------------------------------------------------------------------
// NDCG written directly from the definition, with explicit inverse
// permutation and term-by-term sums.

inline double oracle_ndcg(const std::vector<int>& order, const std::vector<int>& gains, int t = 10) {
  const int n = static_cast<int>(gains.size());
  std::vector<int> rank_of(static_cast<std::size_t>(n));
  for (int pos = 0; pos < n; ++pos) rank_of[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)])] = pos + 1;
  double dcg = 0.0;
  for (int i = 1; i <= std::min(t, n); ++i) {
    for (int d = 0; d < n; ++d) {
      if (rank_of[static_cast<std::size_t>(d)] == i) {
        dcg += (std::pow(2.0, gains[static_cast<std::size_t>(d)]) - 1.0) / (std::log(i + 1.0) / std::log(2.0));
      }
    }
  }
  std::vector<int> sorted = gains;
  std::sort(sorted.rbegin(), sorted.rend());
  double ideal = 0.0;
  for (int i = 1; i <= std::min(t, n); ++i) {
    ideal += (std::pow(2.0, sorted[static_cast<std::size_t>(i - 1)]) - 1.0) / (std::log(i + 1.0) / std::log(2.0));
  }
  return ideal == 0.0 ? 1.0 : dcg / ideal;
}

// ---------------------------------------------------------------------------
// Context and feature oracles: linear scans over sessions.

struct NaiveEntry {
  const Impression* imp = nullptr;
};

struct NaiveContexts {
  std::vector<const Impression*> same_query_user;
  std::vector<const Impression*> other_query_user;
  std::vector<const Impression*> same_query_others;
};

/// Contexts of (user, query) strictly before `target` in the user's
/// chronology; other users' impressions from the training period.
inline NaiveContexts naive_contexts(std::span<const Session> sessions, const SessionOrder& order, int train_days,
                                    UserId user, QueryId query, OrderKey target) {
  NaiveContexts c;
  for (const auto& s : sessions) {
    if (s.day > train_days) continue;
    const auto pos = order.position(s.session_id);
    for (std::size_t i = 0; i < s.impressions.size(); ++i) {
      const Impression& imp = s.impressions[i];
      if (s.user_id == user) {
        const OrderKey k{pos.day, pos.rank_in_day, static_cast<int>(i)};
        if (!(k < target)) continue;
        (imp.query_id == query ? c.same_query_user : c.other_query_user).push_back(&imp);
      } else if (imp.query_id == query) {
        c.same_query_others.push_back(&imp);
      }
    }
  }
  return c;
}

inline double naive_jaccard(const std::vector<TermId>& a, const std::vector<TermId>& b) {
  const std::set<TermId> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::set<TermId> both, either = sa;
  for (auto t : sb) {
    if (sa.count(t)) both.insert(t);
    either.insert(t);
  }
  return either.empty() ? 0.0 : static_cast<double>(both.size()) / static_cast<double>(either.size());
}

/// g1..g20 for `item` over `entries`, from raw impressions and click lists.
inline std::array<double, 20> naive_block(ItemId item, bool domains, const std::vector<TermId>& query_terms,
                                          const std::vector<const Impression*>& entries) {
  double total = 0, n_slots = 0, gmax = 0, gmin = 0;
  bool any_slot = false;
  std::vector<double> sim_c, sim_s, sim_m;
  double shown = 0, clicked = 0, skipped = 0, missed = 0;
  double inv_shown = 0, inv_clicked = 0, inv_skipped = 0, inv_missed = 0;
  double rmax = 0, rmin = 0;
  bool any_click_rank = false;
  for (const Impression* imp : entries) {
    const auto gains = imp->gains();
    std::vector<int> click_positions;
    for (const auto& c : imp->clicks) click_positions.push_back(imp->position_of(c.url_id));
    std::vector<int> slots;
    for (int p = 0; p < 10; ++p) {
      const ItemId it = domains ? imp->domains[static_cast<std::size_t>(p)] : imp->documents[static_cast<std::size_t>(p)];
      if (it == item) slots.push_back(p);
    }
    for (int p : slots) {
      const double g = gains[static_cast<std::size_t>(p)];
      total += g;
      n_slots += 1;
      gmax = any_slot ? std::max(gmax, g) : g;
      gmin = any_slot ? std::min(gmin, g) : g;
      any_slot = true;
    }
    if (slots.empty()) continue;
    const int top = slots.front();
    int top_clicked = -1;
    for (int p : slots) {
      if (std::find(click_positions.begin(), click_positions.end(), p) != click_positions.end()) {
        top_clicked = p;
        break;
      }
    }
    shown += 1;
    inv_shown += 1.0 / (top + 1);
    const double sim = naive_jaccard(query_terms, imp->terms);
    if (top_clicked >= 0) {
      clicked += 1;
      inv_clicked += 1.0 / (top_clicked + 1);
      rmax = any_click_rank ? std::max(rmax, top_clicked + 1.0) : top_clicked + 1.0;
      rmin = any_click_rank ? std::min(rmin, top_clicked + 1.0) : top_clicked + 1.0;
      any_click_rank = true;
      sim_c.push_back(sim);
      continue;
    }
    if (click_positions.empty()) continue;
    bool below = false;
    bool all_above = true;
    for (int p : click_positions) {
      if (p > top) below = true;
      if (p >= top) all_above = false;
    }
    if (below) {
      skipped += 1;
      inv_skipped += 1.0 / (top + 1);
      sim_s.push_back(sim);
    } else if (all_above) {
      missed += 1;
      inv_missed += 1.0 / (top + 1);
      sim_m.push_back(sim);
    }
  }
  auto mean = [](const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  auto mx = [](const std::vector<double>& v) { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); };
  return {total,      n_slots > 0 ? total / n_slots : 0.0,
          gmax,       gmin,
          mean(sim_c), mx(sim_c),
          mean(sim_s), mx(sim_s),
          mean(sim_m), mx(sim_m),
          shown,      clicked,
          skipped,    missed,
          inv_shown,  inv_clicked,
          rmax,       rmin,
          inv_skipped, inv_missed};
}

/// The full 121-value vector of the document at `position` in `target`.
inline std::array<double, kFeatureDim> naive_features(const Impression& target, std::size_t position,
                                                      const NaiveContexts& ctx) {
  std::array<double, kFeatureDim> out{};
  const std::vector<const Impression*>* lists[3] = {&ctx.same_query_user, &ctx.other_query_user,
                                                    &ctx.same_query_others};
  for (std::size_t k = 0; k < 6; ++k) {
    const bool domains = k % 2 == 1;
    const ItemId item = domains ? target.domains[position] : target.documents[position];
    const auto block = naive_block(item, domains, target.terms, *lists[k / 2]);
    std::copy(block.begin(), block.end(), out.begin() + static_cast<std::ptrdiff_t>(k * 20));
  }
  out[120] = static_cast<double>(position + 1);
  return out;
}

/// Fills `storage` with `n` random occurrences over a small item pool so
/// items repeat, and returns a context viewing them. `storage` must outlive
/// the context.
inline Context random_context(Rng& rng, std::vector<Occurrence>& storage, std::size_t n, ItemKind kind) {
  storage.clear();
  for (std::size_t e = 0; e < n; ++e) {
    Occurrence o;
    o.query_id = static_cast<QueryId>(rng.below(4));
    for (int t = 0, nt = static_cast<int>(rng.below(4)); t < nt; ++t) o.terms.push_back(static_cast<TermId>(rng.below(6)));
    std::sort(o.terms.begin(), o.terms.end());
    o.terms.erase(std::unique(o.terms.begin(), o.terms.end()), o.terms.end());
    for (std::size_t p = 0; p < kSerpSize; ++p) {
      o.documents[p] = static_cast<ItemId>(rng.below(15));
      o.domains[p] = static_cast<ItemId>(rng.below(5));
      if (rng.bernoulli(0.2)) {
        o.clicked_mask = static_cast<std::uint16_t>(o.clicked_mask | (1u << p));
        o.gains[p] = static_cast<std::int8_t>(rng.below(3));
      }
    }
    storage.push_back(o);
  }
  Context c;
  c.kind = kind;
  for (const auto& o : storage) c.entries.push_back(&o);
  return c;
}

/// Features whose values are ratios of floating sums rather than counts.
inline bool is_real_valued_feature(std::size_t index) {
  if (index >= 120) return false;
  const std::size_t j = index % 20 + 1;
  return (j >= 5 && j <= 10) || j == 15 || j == 16 || j == 19 || j == 20;
}

}  // namespace ctxrank::testing
