#include "ctxrank/log_model.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <tuple>
#include <unordered_set>

#include "ctxrank/io.hpp"

namespace ctxrank {

std::string_view grade_name(Grade g) noexcept {
  switch (g) {
    case Grade::NoClick:
      return "no_click";
    case Grade::R0:
      return "relevance_0";
    case Grade::R1:
      return "relevance_1";
    case Grade::R2:
      return "relevance_2";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

std::int64_t field_int(std::string_view s, const char* what, std::size_t line_no) {
  try {
    return io::parse_int(s, what);
  } catch (const Error& e) {
    throw ParseError(line_no, e.what());
  }
}

std::vector<TermId> parse_terms(std::string_view s, std::size_t line_no) {
  std::vector<TermId> terms;
  if (s.empty()) return terms;
  for (auto t : io::split(s, ',')) terms.push_back(field_int(t, "term", line_no));
  return terms;
}

}  // namespace

LogRecord parse_line(std::string_view line, std::size_t line_no) {
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.remove_suffix(1);
  const auto f = io::split(line, '\t');
  if (f.size() < 4) {
    throw ParseError(line_no, "expected at least 4 tab-separated fields, got " + std::to_string(f.size()));
  }
  if (f[1] == "M") {
    if (f.size() != 4) throw ParseError(line_no, "metadata record needs 4 fields");
    return SessionMeta{field_int(f[0], "session id", line_no), static_cast<int>(field_int(f[2], "day", line_no)),
                       field_int(f[3], "user id", line_no)};
  }
  if (f[2] == "M") {
    if (f.size() != 5) throw ParseError(line_no, "metadata record needs 5 fields");
    return SessionMeta{field_int(f[0], "session id", line_no), static_cast<int>(field_int(f[3], "day", line_no)),
                       field_int(f[4], "user id", line_no)};
  }
  const auto session = field_int(f[0], "session id", line_no);
  const auto time = field_int(f[1], "time passed", line_no);
  if (time < 0) throw ParseError(line_no, "negative time passed");
  if (f[2] == "C") {
    if (f.size() != 5) throw ParseError(line_no, "click record needs 5 fields");
    return ClickAction{session, time, field_int(f[3], "serp id", line_no), field_int(f[4], "url id", line_no)};
  }
  if (f[2] == "Q" || f[2] == "T") {
    if (f.size() < 6) throw ParseError(line_no, "query record needs at least 6 fields");
    const std::size_t n_results = f.size() - 6;
    if (n_results != kSerpSize) {
      throw DataError("line " + std::to_string(line_no) + ": query record has " + std::to_string(n_results) +
                      " results, expected " + std::to_string(kSerpSize));
    }
    QueryAction q;
    q.session_id = session;
    q.time_passed = time;
    q.serp_id = field_int(f[3], "serp id", line_no);
    q.is_test = f[2] == "T";
    q.query_id = field_int(f[4], "query id", line_no);
    q.terms = parse_terms(f[5], line_no);
    for (std::size_t i = 0; i < kSerpSize; ++i) {
      const auto pair = io::split(f[6 + i], ',');
      if (pair.size() != 2) throw ParseError(line_no, "result must be url,domain");
      q.results[i] = {field_int(pair[0], "url id", line_no), field_int(pair[1], "domain id", line_no)};
    }
    return q;
  }
  throw ParseError(line_no, "unknown record type '" + std::string(f[2]) + "'");
}

std::vector<LogRecord> parse_log(std::string_view text) {
  std::vector<LogRecord> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    auto line = text.substr(start, end - start);
    if (!line.empty() && line != "\r") out.push_back(parse_line(line, line_no));
    start = end + 1;
  }
  return out;
}

std::vector<LogRecord> parse_log(std::istream& in) {
  std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse_log(text);
}

std::vector<LogRecord> parse_log_file(const std::filesystem::path& path) { return parse_log(io::read_text(path)); }

std::string format_record(const LogRecord& record) {
  std::string out;
  auto num = [&out](std::int64_t v) { out += std::to_string(v); };
  std::visit(
      [&](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, SessionMeta>) {
          num(r.session_id);
          out += "\tM\t";
          num(r.day);
          out += '\t';
          num(r.user_id);
        } else if constexpr (std::is_same_v<T, QueryAction>) {
          num(r.session_id);
          out += '\t';
          num(r.time_passed);
          out += r.is_test ? "\tT\t" : "\tQ\t";
          num(r.serp_id);
          out += '\t';
          num(r.query_id);
          out += '\t';
          for (std::size_t i = 0; i < r.terms.size(); ++i) {
            if (i) out += ',';
            num(r.terms[i]);
          }
          for (const auto& res : r.results) {
            out += '\t';
            num(res.url_id);
            out += ',';
            num(res.domain_id);
          }
        } else {
          num(r.session_id);
          out += '\t';
          num(r.time_passed);
          out += "\tC\t";
          num(r.serp_id);
          out += '\t';
          num(r.url_id);
        }
      },
      record);
  return out;
}

void write_log(std::ostream& out, std::span<const LogRecord> records) {
  for (const auto& r : records) out << format_record(r) << '\n';
}

// ---------------------------------------------------------------------------
// Sessions

int Impression::position_of(ItemId url) const noexcept {
  for (std::size_t i = 0; i < kSerpSize; ++i) {
    if (documents[i] == url) return static_cast<int>(i);
  }
  return -1;
}

bool Impression::has_relevant() const noexcept {
  if (!labels) return false;
  return std::any_of(labels->begin(), labels->end(), [](Grade g) { return gain(g) > 0; });
}

std::array<int, kSerpSize> Impression::gains() const {
  std::array<int, kSerpSize> g{};
  if (labels) {
    for (std::size_t i = 0; i < kSerpSize; ++i) g[i] = gain((*labels)[i]);
  }
  return g;
}

std::uint16_t Impression::clicked_mask() const noexcept {
  std::uint16_t mask = 0;
  for (const auto& c : clicks) {
    const int pos = position_of(c.url_id);
    if (pos >= 0) mask |= static_cast<std::uint16_t>(1u << pos);
  }
  return mask;
}

const Impression* Session::find(SerpId serp) const noexcept {
  for (const auto& imp : impressions) {
    if (imp.serp_id == serp) return &imp;
  }
  return nullptr;
}

std::vector<Session> sessionize(std::span<const LogRecord> records) {
  std::vector<Session> sessions;
  std::unordered_map<SessionId, std::size_t> index;
  std::unordered_map<SessionId, std::uint32_t> next_seq;
  struct PendingClick {
    ClickAction click;
    std::uint32_t seq;
  };
  std::vector<PendingClick> pending;

  auto lookup = [&](SessionId id) -> Session& {
    auto it = index.find(id);
    if (it == index.end()) {
      throw DataError("action for session " + std::to_string(id) + " precedes its metadata record");
    }
    return sessions[it->second];
  };

  for (const auto& rec : records) {
    if (const auto* meta = std::get_if<SessionMeta>(&rec)) {
      if (index.contains(meta->session_id)) {
        throw DataError("duplicate metadata for session " + std::to_string(meta->session_id));
      }
      index.emplace(meta->session_id, sessions.size());
      next_seq[meta->session_id] = 1;
      sessions.push_back(Session{meta->session_id, meta->user_id, meta->day, {}});
    } else if (const auto* q = std::get_if<QueryAction>(&rec)) {
      Session& s = lookup(q->session_id);
      if (s.find(q->serp_id) != nullptr) {
        throw DataError("session " + std::to_string(s.session_id) + " repeats serp id " + std::to_string(q->serp_id));
      }
      Impression imp;
      imp.serp_id = q->serp_id;
      imp.query_id = q->query_id;
      imp.time_passed = q->time_passed;
      imp.seq = next_seq[q->session_id]++;
      imp.is_test = q->is_test;
      imp.terms = q->terms;
      for (std::size_t i = 0; i < kSerpSize; ++i) {
        imp.documents[i] = q->results[i].url_id;
        imp.domains[i] = q->results[i].domain_id;
      }
      s.impressions.push_back(std::move(imp));
    } else {
      const auto& c = std::get<ClickAction>(rec);
      lookup(c.session_id);
      pending.push_back({c, next_seq[c.session_id]++});
    }
  }

  for (const auto& [c, seq] : pending) {
    Session& s = sessions[index.at(c.session_id)];
    auto it = std::find_if(s.impressions.begin(), s.impressions.end(),
                           [&](const Impression& imp) { return imp.serp_id == c.serp_id; });
    if (it == s.impressions.end()) {
      throw DataError("click in session " + std::to_string(s.session_id) + " references unknown serp " +
                      std::to_string(c.serp_id));
    }
    if (it->position_of(c.url_id) < 0) {
      throw DataError("click in session " + std::to_string(s.session_id) + " serp " + std::to_string(c.serp_id) +
                      " on url " + std::to_string(c.url_id) + " that was not shown");
    }
    it->clicks.push_back({c.url_id, c.time_passed, seq});
  }

  for (auto& s : sessions) {
    std::stable_sort(s.impressions.begin(), s.impressions.end(), [](const Impression& a, const Impression& b) {
      return std::tie(a.time_passed, a.seq) < std::tie(b.time_passed, b.seq);
    });
    for (auto& imp : s.impressions) {
      std::stable_sort(imp.clicks.begin(), imp.clicks.end(), [](const Click& a, const Click& b) {
        return std::tie(a.time_passed, a.seq) < std::tie(b.time_passed, b.seq);
      });
    }
  }
  return sessions;
}

// ---------------------------------------------------------------------------
// Labeling

namespace {

using EventKey = std::pair<std::int64_t, std::uint32_t>;  // (time_passed, seq)

struct Timeline {
  /// All action timestamps of a session in stream order.
  std::vector<EventKey> events;
  std::optional<EventKey> last_click;
};

Timeline session_timeline(const Session& session) {
  Timeline t;
  for (const auto& imp : session.impressions) {
    t.events.emplace_back(imp.time_passed, imp.seq);
    for (const auto& c : imp.clicks) {
      const EventKey key{c.time_passed, c.seq};
      t.events.push_back(key);
      if (!t.last_click || *t.last_click < key) t.last_click = key;
    }
  }
  std::sort(t.events.begin(), t.events.end());
  return t;
}

Grade grade_for_dwell(std::int64_t dwell) {
  if (dwell < kDwellR1) return Grade::R0;
  if (dwell < kDwellR2) return Grade::R1;
  return Grade::R2;
}

Labels label_with_timeline(const Impression& imp, const Timeline& timeline) {
  Labels labels;
  labels.fill(Grade::NoClick);
  for (const auto& c : imp.clicks) {
    const int pos = imp.position_of(c.url_id);
    if (pos < 0) continue;
    const EventKey key{c.time_passed, c.seq};
    Grade g;
    if (key == timeline.last_click) {
      g = Grade::R2;
    } else {
      auto next = std::upper_bound(timeline.events.begin(), timeline.events.end(), key);
      g = grade_for_dwell(next->first - c.time_passed);
    }
    // Multiple clicks on a document: keep the best grade (= max dwell).
    auto& slot = labels[static_cast<std::size_t>(pos)];
    slot = std::max(slot, g);
  }
  return labels;
}

}  // namespace

Labels label_impression(const Impression& imp, const Session& session) {
  const auto timeline = session_timeline(session);
  return label_with_timeline(imp, timeline);
}

void label_session(Session& session) {
  const auto timeline = session_timeline(session);
  for (auto& imp : session.impressions) imp.labels = label_with_timeline(imp, timeline);
}

void label_sessions(std::span<Session> sessions) {
  for (auto& s : sessions) label_session(s);
}

std::vector<LogRecord> to_records(std::span<const Session> sessions) {
  std::vector<LogRecord> out;
  for (const auto& s : sessions) {
    out.push_back(SessionMeta{s.session_id, s.day, s.user_id});
    std::vector<std::pair<std::uint32_t, LogRecord>> actions;
    for (const auto& imp : s.impressions) {
      QueryAction q;
      q.session_id = s.session_id;
      q.time_passed = imp.time_passed;
      q.serp_id = imp.serp_id;
      q.is_test = imp.is_test;
      q.query_id = imp.query_id;
      q.terms = imp.terms;
      for (std::size_t i = 0; i < kSerpSize; ++i) q.results[i] = {imp.documents[i], imp.domains[i]};
      actions.emplace_back(imp.seq, std::move(q));
      for (const auto& c : imp.clicks) {
        actions.emplace_back(c.seq, ClickAction{s.session_id, c.time_passed, imp.serp_id, c.url_id});
      }
    }
    std::sort(actions.begin(), actions.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& a : actions) out.push_back(std::move(a.second));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Corpus

Corpus::Corpus(std::vector<Session> sessions) : sessions_(std::move(sessions)) {
  by_id_.reserve(sessions_.size());
  for (std::size_t i = 0; i < sessions_.size(); ++i) {
    if (!by_id_.emplace(sessions_[i].session_id, i).second) {
      throw DataError("duplicate session id " + std::to_string(sessions_[i].session_id));
    }
  }
}

const Session* Corpus::find_session(SessionId id) const noexcept {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &sessions_[it->second];
}

const Session& Corpus::session(SessionId id) const {
  const auto* s = find_session(id);
  if (s == nullptr) throw DataError("unknown session " + std::to_string(id));
  return *s;
}

const Impression& Corpus::impression(SessionId session_id, SerpId serp) const {
  const auto* imp = session(session_id).find(serp);
  if (imp == nullptr) {
    throw DataError("unknown serp " + std::to_string(serp) + " in session " + std::to_string(session_id));
  }
  return *imp;
}

// ---------------------------------------------------------------------------
// Binary cache

namespace {
constexpr std::string_view kSessionMagic = "CTXRSES1";
constexpr std::uint32_t kSessionVersion = 1;
}  // namespace

void save_sessions(const std::filesystem::path& path, std::span<const Session> sessions) {
  io::atomic_write(path, [&](std::ostream& out) {
    io::BinaryWriter w(out);
    w.bytes(kSessionMagic);
    w.u32(kSessionVersion);
    w.i64(static_cast<std::int64_t>(sessions.size()));
    for (const auto& s : sessions) {
      w.i64(s.session_id);
      w.i64(s.user_id);
      w.i64(s.day);
      w.u32(static_cast<std::uint32_t>(s.impressions.size()));
      for (const auto& imp : s.impressions) {
        w.i64(imp.serp_id);
        w.i64(imp.query_id);
        w.i64(imp.time_passed);
        w.u32(imp.seq);
        w.u32(imp.is_test ? 1 : 0);
        w.u32(static_cast<std::uint32_t>(imp.terms.size()));
        for (auto t : imp.terms) w.i64(t);
        for (std::size_t i = 0; i < kSerpSize; ++i) {
          w.i64(imp.documents[i]);
          w.i64(imp.domains[i]);
        }
        w.u32(static_cast<std::uint32_t>(imp.clicks.size()));
        for (const auto& c : imp.clicks) {
          w.i64(c.url_id);
          w.i64(c.time_passed);
          w.u32(c.seq);
        }
        w.u32(imp.labels ? 1 : 0);
        if (imp.labels) {
          for (auto g : *imp.labels) w.u32(static_cast<std::uint32_t>(g));
        }
      }
    }
  });
}

std::vector<Session> load_sessions(const std::filesystem::path& path) {
  const std::string data = io::read_text(path);
  io::BinaryReader r(data, path.string());
  if (r.bytes(kSessionMagic.size()) != kSessionMagic) {
    throw DataError(path.string() + " is not a session cache");
  }
  if (const auto v = r.u32(); v != kSessionVersion) {
    throw DataError(path.string() + ": unsupported session cache version " + std::to_string(v));
  }
  const auto n = r.i64();
  std::vector<Session> sessions;
  sessions.reserve(static_cast<std::size_t>(n));
  for (std::int64_t k = 0; k < n; ++k) {
    Session s;
    s.session_id = r.i64();
    s.user_id = r.i64();
    s.day = static_cast<int>(r.i64());
    s.impressions.resize(r.u32());
    for (auto& imp : s.impressions) {
      imp.serp_id = r.i64();
      imp.query_id = r.i64();
      imp.time_passed = r.i64();
      imp.seq = r.u32();
      imp.is_test = r.u32() != 0;
      imp.terms.resize(r.u32());
      for (auto& t : imp.terms) t = r.i64();
      for (std::size_t i = 0; i < kSerpSize; ++i) {
        imp.documents[i] = r.i64();
        imp.domains[i] = r.i64();
      }
      imp.clicks.resize(r.u32());
      for (auto& c : imp.clicks) {
        c.url_id = r.i64();
        c.time_passed = r.i64();
        c.seq = r.u32();
      }
      if (r.u32() != 0) {
        Labels labels;
        for (auto& g : labels) {
          const auto raw = r.u32();
          if (raw > 3) throw DataError(path.string() + ": corrupt label");
          g = static_cast<Grade>(raw);
        }
        imp.labels = labels;
      }
    }
    sessions.push_back(std::move(s));
  }
  if (!r.done()) throw DataError(path.string() + ": trailing bytes in session cache");
  return sessions;
}

// ---------------------------------------------------------------------------
// Statistics

LogStats compute_stats(std::span<const Session> sessions, int train_days) {
  LogStats st;
  std::unordered_set<UserId> users;
  std::unordered_set<QueryId> queries;
  std::unordered_set<ItemId> docs;
  for (const auto& s : sessions) {
    users.insert(s.user_id);
    const bool training = s.day <= train_days;
    (training ? st.training_sessions : st.test_sessions)++;
    ++st.records;
    for (const auto& imp : s.impressions) {
      ++st.records;
      ++st.impressions;
      queries.insert(imp.query_id);
      docs.insert(imp.documents.begin(), imp.documents.end());
      const auto n_clicks = static_cast<std::int64_t>(imp.clicks.size());
      st.records += n_clicks;
      st.clicks += n_clicks;
      if (training) st.training_clicks += n_clicks;
      if (imp.labels) {
        auto& dist = training ? st.training_labels : st.test_period_labels;
        for (auto g : *imp.labels) ++dist[static_cast<std::size_t>(g)];
      }
    }
  }
  st.unique_users = static_cast<std::int64_t>(users.size());
  st.unique_queries = static_cast<std::int64_t>(queries.size());
  st.unique_documents = static_cast<std::int64_t>(docs.size());
  return st;
}

}  // namespace ctxrank
