#include "ctxrank/context_index.hpp"

#include <algorithm>
#include <ostream>
#include <tuple>

#include "ctxrank/io.hpp"

namespace ctxrank {

OrderKey order_key(const SessionOrder& order, const Session& session, std::size_t position) {
  const auto pos = order.position(session.session_id);
  return {pos.day, pos.rank_in_day, static_cast<int>(position)};
}

Occurrence make_occurrence(const Session& session, std::size_t position, OrderKey key) {
  const Impression& imp = session.impressions.at(position);
  Occurrence occ;
  occ.user_id = session.user_id;
  occ.session_id = session.session_id;
  occ.serp_id = imp.serp_id;
  occ.query_id = imp.query_id;
  occ.key = key;
  occ.terms = imp.terms;
  std::sort(occ.terms.begin(), occ.terms.end());
  occ.terms.erase(std::unique(occ.terms.begin(), occ.terms.end()), occ.terms.end());
  occ.documents = imp.documents;
  occ.domains = imp.domains;
  const auto gains = imp.gains();
  for (std::size_t i = 0; i < kSerpSize; ++i) occ.gains[i] = static_cast<std::int8_t>(gains[i]);
  occ.clicked_mask = imp.clicked_mask();
  return occ;
}

ContextIndex ContextIndex::build(std::span<const Session> sessions, const SessionOrder& order, int train_days) {
  ContextIndex index;
  index.train_days_ = train_days;
  index.order_seed_ = order.seed();
  for (const auto& s : sessions) {
    if (s.day > train_days) continue;
    for (std::size_t i = 0; i < s.impressions.size(); ++i) {
      index.occurrences_.push_back(make_occurrence(s, i, order_key(order, s, i)));
    }
  }
  std::sort(index.occurrences_.begin(), index.occurrences_.end(), [](const Occurrence& a, const Occurrence& b) {
    return std::tie(a.key.day, a.session_id, a.key.position) < std::tie(b.key.day, b.session_id, b.key.position);
  });
  index.rebuild_postings();
  return index;
}

void ContextIndex::rebuild_postings() {
  by_query_.clear();
  by_user_.clear();
  for (std::uint32_t i = 0; i < occurrences_.size(); ++i) {
    by_query_[occurrences_[i].query_id].push_back(i);
    by_user_[occurrences_[i].user_id].push_back(i);
  }
  for (auto& [user, postings] : by_user_) {
    std::sort(postings.begin(), postings.end(),
              [this](std::uint32_t a, std::uint32_t b) { return occurrences_[a].key < occurrences_[b].key; });
  }
}

std::span<const std::uint32_t> ContextIndex::query_postings(QueryId query) const noexcept {
  auto it = by_query_.find(query);
  if (it == by_query_.end()) return {};
  return it->second;
}

std::span<const std::uint32_t> ContextIndex::user_postings(UserId user) const noexcept {
  auto it = by_user_.find(user);
  if (it == by_user_.end()) return {};
  return it->second;
}

std::vector<const Occurrence*> ContextIndex::lookup(QueryId query) const {
  std::vector<const Occurrence*> out;
  for (auto i : query_postings(query)) out.push_back(&occurrences_[i]);
  return out;
}

ContextSet assemble_contexts(const ContextIndex& index, UserId user, QueryId query, OrderKey target) {
  ContextSet ctx;
  for (std::size_t k = 0; k < kNumContexts; ++k) ctx[k].kind = context_kind(k);
  const auto occ = index.occurrences();

  for (auto i : index.user_postings(user)) {
    const Occurrence& o = occ[i];
    if (!(o.key < target)) break;  // postings are chronological
    const std::size_t base = o.query_id == query ? 0 : 2;
    ctx[base].entries.push_back(&o);
    ctx[base + 1].entries.push_back(&o);
  }
  for (auto i : index.query_postings(query)) {
    const Occurrence& o = occ[i];
    if (o.user_id == user) continue;
    ctx[4].entries.push_back(&o);
    ctx[5].entries.push_back(&o);
  }
  return ctx;
}

// ---------------------------------------------------------------------------
// Binary cache

namespace {
constexpr std::string_view kIndexMagic = "CTXRIDX1";
constexpr std::uint32_t kIndexVersion = 1;
}  // namespace

void ContextIndex::save(const std::filesystem::path& path) const {
  io::atomic_write(path, [&](std::ostream& out) {
    io::BinaryWriter w(out);
    w.bytes(kIndexMagic);
    w.u32(kIndexVersion);
    w.i64(train_days_);
    w.i64(static_cast<std::int64_t>(order_seed_));
    w.i64(static_cast<std::int64_t>(occurrences_.size()));
    for (const auto& o : occurrences_) {
      w.i64(o.user_id);
      w.i64(o.session_id);
      w.i64(o.serp_id);
      w.i64(o.query_id);
      w.i64(o.key.day);
      w.i64(o.key.session_rank);
      w.i64(o.key.position);
      w.u32(static_cast<std::uint32_t>(o.terms.size()));
      for (auto t : o.terms) w.i64(t);
      for (std::size_t i = 0; i < kSerpSize; ++i) {
        w.i64(o.documents[i]);
        w.i64(o.domains[i]);
        w.u32(static_cast<std::uint32_t>(o.gains[i]));
      }
      w.u32(o.clicked_mask);
    }
  });
}

ContextIndex ContextIndex::load(const std::filesystem::path& path) {
  const std::string data = io::read_text(path);
  io::BinaryReader r(data, path.string());
  if (r.bytes(kIndexMagic.size()) != kIndexMagic) throw DataError(path.string() + " is not an index cache");
  if (const auto v = r.u32(); v != kIndexVersion) {
    throw DataError(path.string() + ": unsupported index cache version " + std::to_string(v));
  }
  ContextIndex index;
  index.train_days_ = static_cast<int>(r.i64());
  index.order_seed_ = static_cast<std::uint64_t>(r.i64());
  index.occurrences_.resize(static_cast<std::size_t>(r.i64()));
  for (auto& o : index.occurrences_) {
    o.user_id = r.i64();
    o.session_id = r.i64();
    o.serp_id = r.i64();
    o.query_id = r.i64();
    o.key.day = static_cast<int>(r.i64());
    o.key.session_rank = static_cast<int>(r.i64());
    o.key.position = static_cast<int>(r.i64());
    o.terms.resize(r.u32());
    for (auto& t : o.terms) t = r.i64();
    for (std::size_t i = 0; i < kSerpSize; ++i) {
      o.documents[i] = r.i64();
      o.domains[i] = r.i64();
      o.gains[i] = static_cast<std::int8_t>(r.u32());
    }
    o.clicked_mask = static_cast<std::uint16_t>(r.u32());
  }
  if (!r.done()) throw DataError(path.string() + ": trailing bytes in index cache");
  index.rebuild_postings();
  return index;
}

}  // namespace ctxrank
