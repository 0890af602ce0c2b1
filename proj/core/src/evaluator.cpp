#include "ctxrank/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

#include "ctxrank/io.hpp"
#include "ctxrank/random.hpp"

namespace ctxrank {

std::vector<int> rank_by_score(std::span<const double> scores, std::span<const int> base_ranks) {
  if (scores.size() != base_ranks.size()) throw std::invalid_argument("rank_by_score: size mismatch");
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto sa = scores[static_cast<std::size_t>(a)];
    const auto sb = scores[static_cast<std::size_t>(b)];
    if (sa != sb) return sa > sb;
    return base_ranks[static_cast<std::size_t>(a)] < base_ranks[static_cast<std::size_t>(b)];
  });
  return order;
}

double ndcg_at(std::span<const int> order, std::span<const int> gains, int truncation) {
  const std::size_t n = gains.size();
  if (order.size() != n) throw std::invalid_argument("ndcg_at: ranking and labels differ in length");
  std::vector<bool> seen(n, false);
  for (int idx : order) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= n || seen[static_cast<std::size_t>(idx)]) {
      throw std::invalid_argument("ndcg_at: ranking is not a permutation");
    }
    seen[static_cast<std::size_t>(idx)] = true;
  }
  const std::size_t t = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(truncation, 0)));
  auto dcg = [t](auto label_at) {
    double sum = 0.0;
    for (std::size_t i = 0; i < t; ++i) {
      sum += (std::exp2(static_cast<double>(label_at(i))) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
    }
    return sum;
  };
  std::vector<int> ideal(gains.begin(), gains.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double ideal_dcg = dcg([&](std::size_t i) { return ideal[i]; });
  if (ideal_dcg == 0.0) return 1.0;
  return dcg([&](std::size_t i) { return gains[static_cast<std::size_t>(order[i])]; }) / ideal_dcg;
}

double kendall_tau(std::span<const std::int64_t> a, std::span<const std::int64_t> b) {
  if (a.size() != b.size()) throw std::invalid_argument("kendall_tau: rankings differ in length");
  std::unordered_map<std::int64_t, std::size_t> pos_b;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!pos_b.emplace(b[i], i).second) throw std::invalid_argument("kendall_tau: duplicate item");
  }
  std::vector<std::size_t> mapped(a.size());
  std::unordered_map<std::int64_t, bool> seen_a;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto it = pos_b.find(a[i]);
    if (it == pos_b.end()) throw std::invalid_argument("kendall_tau: rankings cover different items");
    if (!seen_a.emplace(a[i], true).second) throw std::invalid_argument("kendall_tau: duplicate item");
    mapped[i] = it->second;
  }
  const std::size_t n = a.size();
  if (n < 2) return 1.0;
  long concordant = 0, discordant = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      (mapped[i] < mapped[j] ? concordant : discordant)++;
    }
  }
  const double pairs = static_cast<double>(n * (n - 1) / 2);
  return static_cast<double>(concordant - discordant) / pairs;
}

EvalReport evaluate_run(std::span<const ScoreRow> rows, std::optional<Role> role,
                        std::optional<std::uint64_t> split_seed, int truncation) {
  EvalReport report;
  const auto offsets = target_offsets(rows);
  for (std::size_t g = 0; g + 1 < offsets.size(); ++g) {
    const auto group = rows.subspan(offsets[g], offsets[g + 1] - offsets[g]);
    const ScoreRow& head = group.front();
    if (role && head.role != *role) continue;
    const std::string name = std::string(role_name(head.role)) + " target (user " + std::to_string(head.user_id) +
                             ", session " + std::to_string(head.session_id) + ", serp " +
                             std::to_string(head.serp_id) + ")";
    if (group.size() != kSerpSize) {
      throw DataError(name + " has " + std::to_string(group.size()) + " scored documents, expected " +
                      std::to_string(kSerpSize));
    }
    // Index documents by base rank.
    std::array<const ScoreRow*, kSerpSize> by_rank{};
    for (const auto& r : group) {
      if (r.base_rank < 1 || r.base_rank > static_cast<int>(kSerpSize) ||
          by_rank[static_cast<std::size_t>(r.base_rank - 1)] != nullptr) {
        throw DataError(name + " is missing documents (base ranks are not 1.." + std::to_string(kSerpSize) + ")");
      }
      if (!r.gain) throw DataError(name + " has unlabeled documents");
      by_rank[static_cast<std::size_t>(r.base_rank - 1)] = &r;
    }
    std::vector<double> scores(kSerpSize);
    std::vector<int> base(kSerpSize), gains(kSerpSize);
    std::vector<std::int64_t> base_docs(kSerpSize);
    for (std::size_t i = 0; i < kSerpSize; ++i) {
      scores[i] = by_rank[i]->score;
      base[i] = static_cast<int>(i) + 1;
      gains[i] = *by_rank[i]->gain;
      base_docs[i] = by_rank[i]->doc_id;
    }
    const auto order = rank_by_score(scores, base);
    std::vector<int> identity(kSerpSize);
    std::iota(identity.begin(), identity.end(), 0);
    std::vector<std::int64_t> model_docs(kSerpSize);
    for (std::size_t i = 0; i < kSerpSize; ++i) model_docs[i] = base_docs[static_cast<std::size_t>(order[i])];

    QueryEval q;
    q.role = head.role;
    q.user_id = head.user_id;
    q.session_id = head.session_id;
    q.serp_id = head.serp_id;
    q.ndcg = ndcg_at(order, gains, truncation);
    q.base_ndcg = ndcg_at(identity, gains, truncation);
    q.delta_ndcg = q.ndcg - q.base_ndcg;
    q.tau = kendall_tau(model_docs, base_docs);
    report.queries.push_back(q);
  }

  const auto n = report.queries.size();
  if (n == 0) return report;
  std::size_t high_tau = 0;
  for (const auto& q : report.queries) {
    report.mean_ndcg += q.ndcg;
    report.mean_base_ndcg += q.base_ndcg;
    report.mean_delta += q.delta_ndcg;
    if (q.tau >= 0.7) ++high_tau;
  }
  report.mean_ndcg /= static_cast<double>(n);
  report.mean_base_ndcg /= static_cast<double>(n);
  report.mean_delta /= static_cast<double>(n);
  report.frac_tau_at_least_07 = static_cast<double>(high_tau) / static_cast<double>(n);

  if (split_seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(*split_seed);
    rng.shuffle(std::span<std::size_t>(idx));
    const std::size_t half = (n + 1) / 2;
    double first = 0.0, second = 0.0;
    for (std::size_t i = 0; i < n; ++i) (i < half ? first : second) += report.queries[idx[i]].ndcg;
    report.split_means = {first / static_cast<double>(half),
                          n > half ? second / static_cast<double>(n - half) : 0.0};
  }
  return report;
}

Histogram histogram(std::span<const double> values, double lo, double hi, std::size_t bins) {
  if (bins == 0 || !(hi > lo)) throw std::invalid_argument("histogram: need bins > 0 and hi > lo");
  Histogram h{lo, hi, std::vector<std::int64_t>(bins, 0)};
  const double width = (hi - lo) / static_cast<double>(bins);
  for (double v : values) {
    auto b = static_cast<std::int64_t>(std::floor((v - lo) / width));
    b = std::clamp<std::int64_t>(b, 0, static_cast<std::int64_t>(bins) - 1);
    ++h.counts[static_cast<std::size_t>(b)];
  }
  return h;
}

void write_report_csv(const std::filesystem::path& path, const EvalReport& report) {
  io::atomic_write(path, [&](std::ostream& out) {
    out << "role,user_id,session_id,serp_id,ndcg,base_ndcg,delta_ndcg,kendall_tau\n";
    for (const auto& q : report.queries) {
      out << role_name(q.role) << ',' << q.user_id << ',' << q.session_id << ',' << q.serp_id << ','
          << io::format_double(q.ndcg) << ',' << io::format_double(q.base_ndcg) << ','
          << io::format_double(q.delta_ndcg) << ',' << io::format_double(q.tau) << '\n';
    }
  });
}

void write_summary(const std::filesystem::path& path, const EvalReport& report) {
  io::atomic_write(path, [&](std::ostream& out) {
    out << "key,value\n";
    out << "queries," << report.queries.size() << '\n';
    out << "mean_ndcg," << io::format_double(report.mean_ndcg) << '\n';
    out << "mean_base_ndcg," << io::format_double(report.mean_base_ndcg) << '\n';
    out << "mean_delta_ndcg," << io::format_double(report.mean_delta) << '\n';
    out << "frac_tau_ge_0.7," << io::format_double(report.frac_tau_at_least_07) << '\n';
    if (report.split_means) {
      out << "split_a_mean_ndcg," << io::format_double(report.split_means->first) << '\n';
      out << "split_b_mean_ndcg," << io::format_double(report.split_means->second) << '\n';
    }
  });
}

void write_histogram(const std::filesystem::path& path, const Histogram& h) {
  io::atomic_write(path, [&](std::ostream& out) {
    out << "bin_lo,bin_hi,count\n";
    const double width = (h.hi - h.lo) / static_cast<double>(h.counts.size());
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
      out << io::format_double(h.lo + width * static_cast<double>(i)) << ','
          << io::format_double(h.lo + width * static_cast<double>(i + 1)) << ',' << h.counts[i] << '\n';
    }
  });
}

}  // namespace ctxrank
