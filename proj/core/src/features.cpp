#include "ctxrank/features.hpp"

#include <algorithm>
#include <ostream>

#include "ctxrank/io.hpp"
#include "ctxrank/parallel.hpp"

namespace ctxrank {

double sim_sorted(std::span<const TermId> a, std::span<const TermId> b) noexcept {
  std::size_t i = 0, j = 0, common = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      ++common;
      ++i;
      ++j;
    }
  }
  const std::size_t uni = a.size() + b.size() - common;
  return uni == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(uni);
}

double sim(std::span<const TermId> a, std::span<const TermId> b) {
  auto normalize = [](std::span<const TermId> s) {
    std::vector<TermId> v(s.begin(), s.end());
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  };
  const auto na = normalize(a);
  const auto nb = normalize(b);
  return sim_sorted(na, nb);
}

EventFlags event_flags(ItemId item, std::span<const ItemId, kSerpSize> items, std::uint16_t clicked_mask) noexcept {
  EventFlags f;
  int top = -1;
  for (std::size_t i = 0; i < kSerpSize; ++i) {
    if (items[i] != item) continue;
    if (top < 0) top = static_cast<int>(i);
    if (!f.clicked && ((clicked_mask >> i) & 1u)) {
      f.clicked = true;
      f.r_clicked = static_cast<int>(i) + 1;
    }
  }
  if (top < 0) return f;
  f.shown = true;
  f.r_shown = top + 1;
  if (f.clicked || clicked_mask == 0) return f;
  const unsigned below = clicked_mask >> (top + 1);
  if (below != 0) {
    f.skipped = true;
    f.r_skipped = f.r_shown;
  } else {
    f.missed = true;
    f.r_missed = f.r_shown;
  }
  return f;
}

namespace {

/// Order-independent accumulation of a similarity category.
struct SimStats {
  std::vector<double> values;

  double mean() {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
  }
  double max() const { return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end()); }
};

/// Sum of 1/rank from per-rank counts, in a fixed order.
double reciprocal_sum(const std::array<int, kSerpSize + 1>& counts) {
  double sum = 0.0;
  for (std::size_t r = 1; r <= kSerpSize; ++r) sum += static_cast<double>(counts[r]) / static_cast<double>(r);
  return sum;
}

}  // namespace

ContextFeatures context_features(ItemId item, std::span<const TermId> query_terms, const Context& context) {
  ContextFeatures g{};
  long gain_total = 0;
  long slots = 0;
  int gain_max = 0;
  int gain_min = 0;
  long shown = 0, clicked = 0, skipped = 0, missed = 0;
  int rank_clicked_max = 0, rank_clicked_min = 0;
  std::array<int, kSerpSize + 1> shown_at{}, clicked_at{}, skipped_at{}, missed_at{};
  SimStats sim_clicked, sim_skipped, sim_missed;

  for (const Occurrence* occ : context.entries) {
    const auto items = context.items(*occ);
    for (std::size_t i = 0; i < kSerpSize; ++i) {
      if (items[i] != item) continue;
      const int gi = occ->gains[i];
      gain_max = slots == 0 ? gi : std::max(gain_max, gi);
      gain_min = slots == 0 ? gi : std::min(gain_min, gi);
      gain_total += gi;
      ++slots;
    }
    const EventFlags f = event_flags(item, items, occ->clicked_mask);
    if (!f.shown) continue;
    ++shown;
    ++shown_at[static_cast<std::size_t>(f.r_shown)];
    if (f.clicked) {
      ++clicked;
      ++clicked_at[static_cast<std::size_t>(f.r_clicked)];
      rank_clicked_max = clicked == 1 ? f.r_clicked : std::max(rank_clicked_max, f.r_clicked);
      rank_clicked_min = clicked == 1 ? f.r_clicked : std::min(rank_clicked_min, f.r_clicked);
      sim_clicked.values.push_back(sim_sorted(query_terms, occ->terms));
    } else if (f.skipped) {
      ++skipped;
      ++skipped_at[static_cast<std::size_t>(f.r_skipped)];
      sim_skipped.values.push_back(sim_sorted(query_terms, occ->terms));
    } else if (f.missed) {
      ++missed;
      ++missed_at[static_cast<std::size_t>(f.r_missed)];
      sim_missed.values.push_back(sim_sorted(query_terms, occ->terms));
    }
  }

  g[0] = static_cast<double>(gain_total);
  g[1] = slots == 0 ? 0.0 : static_cast<double>(gain_total) / static_cast<double>(slots);
  g[2] = gain_max;
  g[3] = gain_min;
  g[4] = sim_clicked.mean();
  g[5] = sim_clicked.max();
  g[6] = sim_skipped.mean();
  g[7] = sim_skipped.max();
  g[8] = sim_missed.mean();
  g[9] = sim_missed.max();
  g[10] = static_cast<double>(shown);
  g[11] = static_cast<double>(clicked);
  g[12] = static_cast<double>(skipped);
  g[13] = static_cast<double>(missed);
  g[14] = reciprocal_sum(shown_at);
  g[15] = reciprocal_sum(clicked_at);
  g[16] = rank_clicked_max;
  g[17] = rank_clicked_min;
  g[18] = reciprocal_sum(skipped_at);
  g[19] = reciprocal_sum(missed_at);
  return g;
}

std::array<FeatureVector, kSerpSize> extract(const Impression& target, UserId user, const ContextSet& contexts) {
  std::vector<TermId> terms = target.terms;
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
  const auto gains = target.gains();

  std::array<FeatureVector, kSerpSize> out;
  for (std::size_t pos = 0; pos < kSerpSize; ++pos) {
    FeatureVector& fv = out[pos];
    fv.user_id = user;
    fv.query_id = target.query_id;
    fv.doc_id = target.documents[pos];
    for (std::size_t k = 0; k < kNumContexts; ++k) {
      const ItemId item = contexts[k].kind == ItemKind::Document ? target.documents[pos] : target.domains[pos];
      const auto block = context_features(item, terms, contexts[k]);
      std::copy(block.begin(), block.end(), fv.values.begin() + static_cast<std::ptrdiff_t>(k * kFeaturesPerContext));
    }
    fv.values[kBaseRankFeature] = Impression::base_rank(pos);
    if (target.labels) fv.gain = gains[pos];
  }
  return out;
}

std::vector<FeatureRow> extract_targets(const Corpus& corpus, const SessionOrder& order, const ContextIndex& index,
                                        const TargetSet& targets, unsigned threads) {
  const auto all = targets.all();
  std::vector<FeatureRow> rows(all.size() * kSerpSize);
  parallel_for(all.size(), threads, [&](std::size_t t) {
    const TargetRef& ref = all[t];
    const Session& session = corpus.session(ref.session_id);
    if (session.user_id != ref.user_id) {
      throw DataError("target session " + std::to_string(ref.session_id) + " does not belong to user " +
                      std::to_string(ref.user_id));
    }
    std::size_t position = session.impressions.size();
    for (std::size_t i = 0; i < session.impressions.size(); ++i) {
      if (session.impressions[i].serp_id == ref.serp_id) position = i;
    }
    if (position == session.impressions.size()) {
      throw DataError("unknown serp " + std::to_string(ref.serp_id) + " in session " + std::to_string(ref.session_id));
    }
    const Impression& imp = session.impressions[position];
    const auto contexts = assemble_contexts(index, ref.user_id, imp.query_id, order_key(order, session, position));
    const auto vectors = extract(imp, ref.user_id, contexts);
    for (std::size_t d = 0; d < kSerpSize; ++d) {
      rows[t * kSerpSize + d] = FeatureRow{ref.role, ref.session_id, ref.serp_id, vectors[d]};
    }
  });
  return rows;
}

std::vector<std::string> feature_names() {
  std::vector<std::string> names;
  names.reserve(kFeatureDim);
  for (std::size_t k = 1; k <= kNumContexts; ++k) {
    for (std::size_t j = 1; j <= kFeaturesPerContext; ++j) {
      names.push_back("c" + std::to_string(k) + "_g" + std::to_string(j));
    }
  }
  names.emplace_back("base_rank");
  return names;
}

namespace {

std::string features_header() {
  std::string h = "role,user_id,session_id,serp_id,query_id,doc_id";
  for (const auto& n : feature_names()) h += "," + n;
  h += ",gain";
  return h;
}

}  // namespace

void write_features(const std::filesystem::path& path, std::span<const FeatureRow> rows) {
  io::atomic_write(path, [&](std::ostream& out) {
    out << features_header() << '\n';
    std::string line;
    for (const auto& r : rows) {
      line.clear();
      line += role_name(r.role);
      for (auto v : {r.features.user_id, static_cast<std::int64_t>(r.session_id), static_cast<std::int64_t>(r.serp_id),
                     r.features.query_id, r.features.doc_id}) {
        line += ',';
        line += std::to_string(v);
      }
      for (double v : r.features.values) {
        line += ',';
        line += io::format_double(v);
      }
      line += ',';
      if (r.features.gain) line += std::to_string(*r.features.gain);
      line += '\n';
      out << line;
    }
  });
}

std::vector<FeatureRow> read_features(const std::filesystem::path& path) {
  const std::string text = io::read_text(path);
  const std::string header = features_header();
  std::vector<FeatureRow> rows;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const std::string_view line(text.data() + start, end - start);
    start = end + 1;
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != header) throw ParseError(1, path.string() + ": unexpected feature file header");
      continue;
    }
    const auto f = io::split(line, ',');
    if (f.size() != 6 + kFeatureDim + 1) {
      throw ParseError(line_no, path.string() + ": expected " + std::to_string(7 + kFeatureDim) + " columns, got " +
                                    std::to_string(f.size()));
    }
    try {
      FeatureRow r;
      r.role = parse_role(f[0]);
      r.features.user_id = io::parse_int(f[1], "user_id");
      r.session_id = io::parse_int(f[2], "session_id");
      r.serp_id = io::parse_int(f[3], "serp_id");
      r.features.query_id = io::parse_int(f[4], "query_id");
      r.features.doc_id = io::parse_int(f[5], "doc_id");
      for (std::size_t k = 0; k < kFeatureDim; ++k) r.features.values[k] = io::parse_double(f[6 + k], "feature");
      if (!f.back().empty()) r.features.gain = static_cast<int>(io::parse_int(f.back(), "gain"));
      rows.push_back(std::move(r));
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(line_no, path.string() + ": " + e.what());
    }
  }
  return rows;
}

}  // namespace ctxrank
