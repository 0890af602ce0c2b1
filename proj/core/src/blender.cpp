#include "ctxrank/blender.hpp"

#include <cmath>
#include <numeric>

#include "json.hpp"

#include "ctxrank/evaluator.hpp"
#include "ctxrank/io.hpp"
#include "ctxrank/random.hpp"
#include "ctxrank/ranker.hpp"

namespace ctxrank {

std::string_view blend_method_name(BlendMethod m) noexcept {
  return m == BlendMethod::Average ? "average" : "learned";
}

BlendMethod parse_blend_method(std::string_view s) {
  if (s == "average") return BlendMethod::Average;
  if (s == "learned") return BlendMethod::Learned;
  throw ConfigError("unknown blend method '" + std::string(s) + "' (average, learned)");
}

ScoreStats ScoreStats::fit(std::span<const double> scores) {
  ScoreStats st;
  if (scores.empty()) return st;
  const double n = static_cast<double>(scores.size());
  st.mean = std::accumulate(scores.begin(), scores.end(), 0.0) / n;
  double var = 0.0;
  for (double s : scores) var += (s - st.mean) * (s - st.mean);
  const double sd = std::sqrt(var / n);
  st.sd = sd > 0.0 ? sd : 1.0;
  return st;
}

std::size_t check_aligned(const MemberScores& members) {
  if (members.empty()) throw DataError("blend needs at least one member");
  const std::size_t n = members.front().size();
  for (std::size_t m = 1; m < members.size(); ++m) {
    if (members[m].size() != n) {
      throw DataError("member " + std::to_string(m) + " scored " + std::to_string(members[m].size()) +
                      " documents, expected " + std::to_string(n));
    }
  }
  return n;
}

std::vector<double> apply_blend(const BlendModel& model, const MemberScores& members) {
  const std::size_t n = check_aligned(members);
  if (members.size() != model.weights.size() || model.standardizers.size() != model.weights.size()) {
    throw DataError("blend has " + std::to_string(model.weights.size()) + " members, got " +
                    std::to_string(members.size()) + " score sets");
  }
  std::vector<double> out(n, model.bias);
  for (std::size_t m = 0; m < members.size(); ++m) {
    for (std::size_t i = 0; i < n; ++i) out[i] += model.weights[m] * model.standardizers[m].apply(members[m][i]);
  }
  return out;
}

BlendModel fit_average(const MemberScores& members, std::vector<std::string> names) {
  check_aligned(members);
  BlendModel model;
  model.method = BlendMethod::Average;
  model.members = std::move(names);
  model.members.resize(members.size());
  for (const auto& s : members) model.standardizers.push_back(ScoreStats::fit(s));
  model.weights.assign(members.size(), 1.0 / static_cast<double>(members.size()));
  return model;
}

std::vector<double> blend_average(const MemberScores& members) {
  return apply_blend(fit_average(members, {}), members);
}

namespace {

double mean_ndcg_over(const BlendPool& pool, std::span<const double> scores, std::span<const std::size_t> queries) {
  if (queries.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t q : queries) {
    const std::size_t b = pool.offsets[q];
    const std::size_t n = pool.offsets[q + 1] - b;
    const auto order = rank_by_score(scores.subspan(b, n), std::span(pool.base_ranks).subspan(b, n));
    sum += ndcg_at(order, std::span(pool.gains).subspan(b, n));
  }
  return sum / static_cast<double>(queries.size());
}

}  // namespace

BlendModel blend_learned(const MemberScores& members, std::vector<std::string> names, const BlendPool& pool,
                         std::uint64_t split_seed, const LearnedBlendParams& params) {
  if (members.size() < 2) throw DataError("learned blend needs at least 2 members");
  const std::size_t n = check_aligned(members);
  if (pool.gains.size() != n || pool.base_ranks.size() != n || pool.offsets.back() != n ||
      pool.fit_eligible.size() != pool.queries()) {
    throw DataError("blend pool does not match the member scores");
  }
  BlendModel model = fit_average(members, std::move(names));
  const std::size_t m_count = members.size();

  std::vector<std::size_t> eligible;
  for (std::size_t q = 0; q < pool.queries(); ++q) {
    if (pool.fit_eligible[q]) eligible.push_back(q);
  }
  Rng rng(split_seed);
  rng.shuffle(std::span<std::size_t>(eligible));
  const std::size_t half = eligible.size() / 2;
  if (half == 0 || eligible.size() - half == 0) {
    throw DataError("degenerate blend split: " + std::to_string(eligible.size()) + " validation queries");
  }
  const std::span<const std::size_t> fit(eligible.data(), half);
  const std::span<const std::size_t> holdout(eligible.data() + half, eligible.size() - half);

  std::vector<double> z(n * m_count);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t m = 0; m < m_count; ++m) z[i * m_count + m] = model.standardizers[m].apply(members[m][i]);
  }

  std::vector<double> w(m_count, 0.0), grad(m_count), s, ds;
  for (int it = 0; it < params.iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t q : fit) {
      const std::size_t b = pool.offsets[q];
      const std::size_t len = pool.offsets[q + 1] - b;
      s.assign(len, 0.0);
      ds.assign(len, 0.0);
      for (std::size_t i = 0; i < len; ++i) {
        for (std::size_t m = 0; m < m_count; ++m) s[i] += w[m] * z[(b + i) * m_count + m];
      }
      ranknet_loss(s, std::span(pool.gains).subspan(b, len), ds);
      for (std::size_t i = 0; i < len; ++i) {
        for (std::size_t m = 0; m < m_count; ++m) grad[m] += ds[i] * z[(b + i) * m_count + m];
      }
    }
    for (std::size_t m = 0; m < m_count; ++m) w[m] -= params.learning_rate * grad[m] / static_cast<double>(fit.size());
  }

  const auto average = apply_blend(model, members);
  model.method = BlendMethod::Learned;
  model.weights = w;
  model.bias = 0.0;
  model.split_seed = split_seed;
  model.params = params;
  model.fit_queries = fit.size();
  model.holdout_queries = holdout.size();
  model.holdout_ndcg_learned = mean_ndcg_over(pool, apply_blend(model, members), holdout);
  model.holdout_ndcg_average = mean_ndcg_over(pool, average, holdout);
  for (const auto& member : members) model.holdout_ndcg_members.push_back(mean_ndcg_over(pool, member, holdout));
  return model;
}

void save_blend(const std::filesystem::path& path, const BlendModel& model) {
  nlohmann::json j;
  j["format"] = "ctxrank-blend";
  j["version"] = 1;
  j["method"] = std::string(blend_method_name(model.method));
  j["bias"] = model.bias;
  auto& members = j["members"] = nlohmann::json::array();
  for (std::size_t m = 0; m < model.weights.size(); ++m) {
    members.push_back({{"scores", m < model.members.size() ? model.members[m] : std::string()},
                       {"mean", model.standardizers[m].mean},
                       {"sd", model.standardizers[m].sd},
                       {"weight", model.weights[m]}});
    if (m < model.holdout_ndcg_members.size()) members.back()["holdout_ndcg"] = model.holdout_ndcg_members[m];
  }
  if (model.method == BlendMethod::Learned) {
    j["split_seed"] = model.split_seed;
    j["learning_rate"] = model.params.learning_rate;
    j["iterations"] = model.params.iterations;
    j["fit_queries"] = model.fit_queries;
    j["holdout_queries"] = model.holdout_queries;
    j["holdout_ndcg_learned"] = model.holdout_ndcg_learned;
    j["holdout_ndcg_average"] = model.holdout_ndcg_average;
  }
  io::atomic_write(path, [&](std::ostream& out) { out << j.dump(1) << '\n'; });
}

BlendModel load_blend(const std::filesystem::path& path) {
  io::require_file(path);
  try {
    const auto j = nlohmann::json::parse(io::read_text(path));
    if (j.at("format") != "ctxrank-blend" || j.at("version") != 1) {
      throw DataError(path.string() + ": unsupported blend manifest");
    }
    BlendModel model;
    model.method = parse_blend_method(j.at("method").get<std::string>());
    model.bias = j.at("bias").get<double>();
    for (const auto& m : j.at("members")) {
      model.members.push_back(m.at("scores").get<std::string>());
      model.standardizers.push_back({m.at("mean").get<double>(), m.at("sd").get<double>()});
      model.weights.push_back(m.at("weight").get<double>());
      if (m.contains("holdout_ndcg")) model.holdout_ndcg_members.push_back(m.at("holdout_ndcg").get<double>());
    }
    if (model.method == BlendMethod::Learned) {
      model.split_seed = j.at("split_seed").get<std::uint64_t>();
      model.params.learning_rate = j.at("learning_rate").get<double>();
      model.params.iterations = j.at("iterations").get<int>();
      model.fit_queries = j.at("fit_queries").get<std::size_t>();
      model.holdout_queries = j.at("holdout_queries").get<std::size_t>();
      model.holdout_ndcg_learned = j.at("holdout_ndcg_learned").get<double>();
      model.holdout_ndcg_average = j.at("holdout_ndcg_average").get<double>();
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed blend manifest (" + e.what() + ")");
  }
}

}  // namespace ctxrank
