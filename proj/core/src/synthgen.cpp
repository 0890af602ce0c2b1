#include "ctxrank/synthgen.hpp"

#include <algorithm>
#include <array>
#include <iterator>
#include <ostream>
#include <string>
#include <tuple>
#include <unordered_set>
#include <vector>

#include "ctxrank/common.hpp"
#include "ctxrank/io.hpp"
#include "ctxrank/log_model.hpp"
#include "ctxrank/random.hpp"

namespace ctxrank {

namespace {

constexpr std::size_t kPoolSize = 14;
constexpr double kDocPreferenceRate = 0.05;
constexpr double kDomainPreferenceRate = 0.15;
constexpr int kTopicsPerUser = 3;
// Click model.
constexpr double kAbandonProb = 0.05;
constexpr double kSatisfiedStopProb = 0.3;
constexpr double kBaseAttraction = 0.05;
constexpr double kQualityAttraction = 0.35;
constexpr double kPreferredAttraction = 0.85;

// Stream tags for stateless hashing.
enum Tag : std::uint64_t {
  kTagDomain = 1,
  kTagQuality,
  kTagTopicTerm,
  kTagQueryTerm,
  kTagDocPref,
  kTagDomainPref,
  kTagUser,
  kTagPool,
};

struct Layout {
  std::int64_t queries_per_topic;
  std::int64_t docs_per_topic;
  std::int64_t domains_per_topic;
};

Layout layout_of(const GenConfig& c) {
  return {c.n_queries / c.n_topics, c.n_documents / c.n_topics, c.n_domains / c.n_topics};
}

std::int64_t topic_of_query(const Layout& l, std::int64_t q) { return q / l.queries_per_topic; }

std::int64_t domain_of(const GenConfig& c, const Layout& l, std::int64_t doc) {
  const std::int64_t topic = doc / l.docs_per_topic;
  const auto offset = hash_combine(c.rng_seed, kTagDomain, doc) % static_cast<std::uint64_t>(l.domains_per_topic);
  return topic * l.domains_per_topic + static_cast<std::int64_t>(offset);
}

double quality_of(const GenConfig& c, std::int64_t doc) {
  return unit_from_hash(hash_combine(c.rng_seed, kTagQuality, doc));
}

struct QueryInfo {
  std::vector<TermId> terms;
  std::array<std::int64_t, kPoolSize> pool{};
};

QueryInfo make_query(const GenConfig& c, const Layout& l, std::int64_t q) {
  QueryInfo info;
  const std::int64_t topic = topic_of_query(l, q);
  const auto n_terms = static_cast<std::uint64_t>(c.n_terms);
  // One of two shared topic terms plus one or two query-specific terms, so
  // queries within a topic overlap partially.
  const auto which = hash_combine(c.rng_seed, kTagTopicTerm, q) % 2;
  info.terms.push_back(static_cast<TermId>(hash_combine(c.rng_seed, kTagTopicTerm, topic, which) % n_terms));
  const auto own = 1 + hash_combine(c.rng_seed, kTagQueryTerm, q) % 2;
  for (std::uint64_t k = 0; k < own; ++k) {
    info.terms.push_back(static_cast<TermId>(hash_combine(c.rng_seed, kTagQueryTerm, q, k) % n_terms));
  }
  std::sort(info.terms.begin(), info.terms.end());
  info.terms.erase(std::unique(info.terms.begin(), info.terms.end()), info.terms.end());

  Rng rng(hash_combine(c.rng_seed, kTagPool, q));
  const std::int64_t base = topic * l.docs_per_topic;
  std::size_t filled = 0;
  while (filled < kPoolSize) {
    const auto doc = base + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(l.docs_per_topic)));
    if (std::find(info.pool.begin(), info.pool.begin() + static_cast<std::ptrdiff_t>(filled), doc) ==
        info.pool.begin() + static_cast<std::ptrdiff_t>(filled)) {
      info.pool[filled++] = doc;
    }
  }
  return info;
}

struct GenClick {
  std::int64_t time;
  std::int64_t doc;
};

struct GenQuery {
  std::int64_t time = 0;
  std::int64_t query = 0;
  bool is_test = false;
  std::array<std::int64_t, kSerpSize> results{};
  std::vector<GenClick> clicks;
};

struct GenSession {
  int day = 0;
  std::int64_t user = 0;
  int local_index = 0;
  std::vector<GenQuery> queries;
};

class UserSimulator {
 public:
  UserSimulator(const GenConfig& c, const Layout& l, const std::vector<QueryInfo>& queries, std::int64_t user)
      : c_(c), l_(l), queries_(queries), user_(user), rng_(hash_combine(c.rng_seed, kTagUser, user)) {
    const auto n_topics = static_cast<std::uint64_t>(c.n_topics);
    while (topics_.size() < std::min<std::uint64_t>(kTopicsPerUser, n_topics)) {
      const auto t = static_cast<std::int64_t>(rng_.below(n_topics));
      if (std::find(topics_.begin(), topics_.end(), t) == topics_.end()) topics_.push_back(t);
    }
  }

  std::vector<GenSession> run() {
    std::vector<GenSession> sessions;
    const int q_per_day = c_.queries_per_user_per_day;
    auto day_sessions = [&](int day) {
      if (!rng_.bernoulli(c_.activity_prob)) return;
      const bool split = q_per_day >= 2 && rng_.bernoulli(0.25);
      const int first = split ? (q_per_day + 1) / 2 : q_per_day;
      sessions.push_back(session(day, first, false));
      if (split) sessions.push_back(session(day, q_per_day - first, false));
    };
    for (int day = 1; day <= c_.train_days(); ++day) day_sessions(day);

    const int test_day = c_.train_days() + 1 + static_cast<int>(rng_.below(3));
    for (int day = c_.train_days() + 1; day <= c_.n_days; ++day) {
      if (!c_.prune_test_period) day_sessions(day);
      if (day == test_day) sessions.push_back(session(day, q_per_day, true));
    }
    return sessions;
  }

 private:
  GenSession session(int day, int n_queries, bool test) {
    GenSession s;
    s.day = day;
    s.user = user_;
    s.local_index = local_index_++;
    std::int64_t t = 0;
    for (int k = 0; k < n_queries; ++k) {
      GenQuery gq = issue(t);
      gq.is_test = test && k + 1 == n_queries;
      t = simulate_clicks(gq);
      s.queries.push_back(std::move(gq));
    }
    return s;
  }

  std::int64_t pick_query() {
    if (!history_.empty() && rng_.bernoulli(c_.repeat_query_prob)) {
      return history_[rng_.below(history_.size())];
    }
    const std::int64_t topic = rng_.bernoulli(0.8)
                                   ? topics_[rng_.below(topics_.size())]
                                   : static_cast<std::int64_t>(rng_.below(static_cast<std::uint64_t>(c_.n_topics)));
    return topic * l_.queries_per_topic +
           static_cast<std::int64_t>(rng_.below(static_cast<std::uint64_t>(l_.queries_per_topic)));
  }

  GenQuery issue(std::int64_t t) {
    GenQuery gq;
    gq.time = t;
    gq.query = pick_query();
    history_.push_back(gq.query);
    const auto& pool = queries_[static_cast<std::size_t>(gq.query)].pool;
    std::array<std::pair<double, std::int64_t>, kPoolSize> scored;
    for (std::size_t i = 0; i < kPoolSize; ++i) {
      scored[i] = {quality_of(c_, pool[i]) + 0.35 * (rng_.uniform() - 0.5), pool[i]};
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      return std::tie(b.first, a.second) < std::tie(a.first, b.second);
    });
    for (std::size_t i = 0; i < kSerpSize; ++i) gq.results[i] = scored[i].second;
    return gq;
  }

  std::int64_t generic_dwell() {
    const double r = rng_.uniform();
    if (r < 0.35) return rng_.between(5, kDwellR1 - 1);
    if (r < 0.85) return rng_.between(kDwellR1, kDwellR2 - 1);
    return rng_.between(kDwellR2, 1000);
  }

  /// Top-down scan; returns the time of the next action.
  std::int64_t simulate_clicks(GenQuery& gq) {
    const double p = c_.preference_strength;
    std::int64_t now = gq.time + rng_.between(3, 20);
    for (std::size_t pos = 0; pos < kSerpSize; ++pos) {
      const auto doc = gq.results[pos];
      const bool pref = planted_preference(c_, user_, gq.query, doc);
      const double attract_plain = kBaseAttraction + kQualityAttraction * quality_of(c_, doc);
      const double attract = pref ? (1.0 - p) * attract_plain + p * kPreferredAttraction : attract_plain;
      if (rng_.bernoulli(attract)) {
        const std::int64_t dwell = pref && rng_.bernoulli(p) ? rng_.between(kDwellR2, 1500) : generic_dwell();
        gq.clicks.push_back({now, doc});
        now += dwell;
        if (dwell >= kDwellR2 && rng_.bernoulli(kSatisfiedStopProb)) break;
      }
      if (rng_.bernoulli(kAbandonProb)) break;
    }
    if (gq.clicks.empty()) return gq.time + rng_.between(10, 60);
    return now;
  }

  const GenConfig& c_;
  const Layout& l_;
  const std::vector<QueryInfo>& queries_;
  std::int64_t user_;
  Rng rng_;
  std::vector<std::int64_t> topics_;
  std::vector<std::int64_t> history_;
  int local_index_ = 0;
};

}  // namespace

void GenConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError("generator config: " + msg);
  };
  require(n_users >= 1, "n_users must be >= 1");
  require(n_days >= 4, "n_days must be >= 4");
  require(queries_per_user_per_day >= 1, "queries_per_user_per_day must be >= 1");
  require(n_topics >= 1, "n_topics must be >= 1");
  require(n_queries >= n_topics, "n_queries must be >= n_topics");
  require(n_terms >= 1, "n_terms must be >= 1");
  require(n_documents / std::max<std::int64_t>(n_topics, 1) >= static_cast<std::int64_t>(kPoolSize),
          "n_documents must be >= " + std::to_string(kPoolSize) + " * n_topics");
  require(n_domains >= n_topics, "n_domains must be >= n_topics");
  require(preference_strength >= 0.0 && preference_strength <= 1.0, "preference_strength must be in [0, 1]");
  require(repeat_query_prob >= 0.0 && repeat_query_prob <= 1.0, "repeat_query_prob must be in [0, 1]");
  require(activity_prob >= 0.0 && activity_prob <= 1.0, "activity_prob must be in [0, 1]");
}

GenConfig GenConfig::from_config(const KeyValueConfig& cfg) { return from_config(cfg, GenConfig{}); }

GenConfig GenConfig::from_config(const KeyValueConfig& cfg, const GenConfig& d) {
  GenConfig c;
  c.n_users = cfg.get_int("gen.n_users", d.n_users);
  c.n_days = static_cast<int>(cfg.get_int("gen.n_days", d.n_days));
  c.queries_per_user_per_day = static_cast<int>(cfg.get_int("gen.queries_per_user_per_day", d.queries_per_user_per_day));
  c.n_queries = cfg.get_int("gen.n_queries", d.n_queries);
  c.n_terms = cfg.get_int("gen.n_terms", d.n_terms);
  c.n_documents = cfg.get_int("gen.n_documents", d.n_documents);
  c.n_domains = cfg.get_int("gen.n_domains", d.n_domains);
  c.n_topics = cfg.get_int("gen.n_topics", d.n_topics);
  c.preference_strength = cfg.get_double("gen.preference_strength", d.preference_strength);
  c.repeat_query_prob = cfg.get_double("gen.repeat_query_prob", d.repeat_query_prob);
  c.activity_prob = cfg.get_double("gen.activity_prob", d.activity_prob);
  c.prune_test_period = cfg.get_bool("gen.prune_test_period", d.prune_test_period);
  c.rng_seed = cfg.get_uint("gen.seed", d.rng_seed);
  return c;
}

void GenConfig::to_config(KeyValueConfig& cfg) const {
  cfg.set("gen.n_users", std::to_string(n_users));
  cfg.set("gen.n_days", std::to_string(n_days));
  cfg.set("gen.queries_per_user_per_day", std::to_string(queries_per_user_per_day));
  cfg.set("gen.n_queries", std::to_string(n_queries));
  cfg.set("gen.n_terms", std::to_string(n_terms));
  cfg.set("gen.n_documents", std::to_string(n_documents));
  cfg.set("gen.n_domains", std::to_string(n_domains));
  cfg.set("gen.n_topics", std::to_string(n_topics));
  cfg.set("gen.preference_strength", io::format_double(preference_strength));
  cfg.set("gen.repeat_query_prob", io::format_double(repeat_query_prob));
  cfg.set("gen.activity_prob", io::format_double(activity_prob));
  cfg.set("gen.prune_test_period", prune_test_period ? "true" : "false");
  cfg.set("gen.seed", std::to_string(rng_seed));
}

bool planted_preference(const GenConfig& c, std::int64_t user, std::int64_t query, std::int64_t doc) {
  const Layout l = layout_of(c);
  if (unit_from_hash(hash_combine(c.rng_seed, kTagDocPref, user, query, doc)) < kDocPreferenceRate) return true;
  const auto topic = topic_of_query(l, query);
  const auto domain = domain_of(c, l, doc);
  return unit_from_hash(hash_combine(c.rng_seed, kTagDomainPref, user, topic, domain)) < kDomainPreferenceRate;
}

GenStats generate(const GenConfig& config, std::ostream& out) {
  config.validate();
  const Layout l = layout_of(config);
  const std::int64_t n_queries = l.queries_per_topic * config.n_topics;
  std::vector<QueryInfo> queries;
  queries.reserve(static_cast<std::size_t>(n_queries));
  for (std::int64_t q = 0; q < n_queries; ++q) queries.push_back(make_query(config, l, q));

  std::vector<GenSession> sessions;
  for (std::int64_t u = 0; u < config.n_users; ++u) {
    auto s = UserSimulator(config, l, queries, u).run();
    std::move(s.begin(), s.end(), std::back_inserter(sessions));
  }
  // Session ids grow with time: order by day, then user, then per-user order.
  std::sort(sessions.begin(), sessions.end(), [](const GenSession& a, const GenSession& b) {
    return std::tie(a.day, a.user, a.local_index) < std::tie(b.day, b.user, b.local_index);
  });

  GenStats st;
  std::unordered_set<std::int64_t> users;
  std::unordered_set<std::int64_t> unique_queries;
  std::unordered_set<std::int64_t> unique_docs;
  SessionId next_session = 1;
  std::string line;
  for (const auto& s : sessions) {
    const SessionId sid = next_session++;
    const bool training = s.day <= config.train_days();
    users.insert(s.user);
    ++st.sessions;
    (training ? st.training_sessions : st.test_sessions)++;
    out << format_record(SessionMeta{sid, s.day, s.user}) << '\n';
    ++st.records;
    SerpId serp = 0;
    for (const auto& gq : s.queries) {
      QueryAction q;
      q.session_id = sid;
      q.time_passed = gq.time;
      q.serp_id = serp;
      q.is_test = gq.is_test;
      q.query_id = gq.query;
      q.terms = queries[static_cast<std::size_t>(gq.query)].terms;
      for (std::size_t i = 0; i < kSerpSize; ++i) {
        q.results[i] = {gq.results[i], domain_of(config, l, gq.results[i])};
        unique_docs.insert(gq.results[i]);
      }
      out << format_record(q) << '\n';
      ++st.records;
      ++st.impressions;
      if (gq.is_test) ++st.test_queries;
      unique_queries.insert(gq.query);
      for (const auto& c : gq.clicks) {
        out << format_record(ClickAction{sid, c.time, serp, c.doc}) << '\n';
        ++st.records;
        ++st.clicks;
        if (training) ++st.training_clicks;
      }
      ++serp;
    }
  }
  st.users = static_cast<std::int64_t>(users.size());
  st.unique_queries = static_cast<std::int64_t>(unique_queries.size());
  st.unique_documents = static_cast<std::int64_t>(unique_docs.size());
  return st;
}

}  // namespace ctxrank
