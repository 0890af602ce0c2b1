#include "ctxrank/ranker.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <tuple>

#include "json.hpp"

#include "ctxrank/evaluator.hpp"
#include "ctxrank/io.hpp"
#include "ctxrank/parallel.hpp"
#include "ctxrank/random.hpp"
#include "ctxrank/score_file.hpp"

namespace ctxrank {

std::string_view model_kind_name(ModelKind k) noexcept {
  switch (k) {
    case ModelKind::Heuristic: return "heuristic";
    case ModelKind::Regression: return "regression";
    case ModelKind::RankNet: return "ranknet";
    case ModelKind::ListNet: return "listnet";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view s) {
  for (auto k : {ModelKind::Heuristic, ModelKind::Regression, ModelKind::RankNet, ModelKind::ListNet}) {
    if (s == model_kind_name(k)) return k;
  }
  throw ConfigError("unknown model kind '" + std::string(s) + "' (heuristic, regression, ranknet, listnet)");
}

Standardizer Standardizer::fit(std::span<const double> rows, std::size_t dim) {
  if (dim == 0 || rows.size() % dim != 0) throw DataError("standardizer: ragged feature matrix");
  const std::size_t n = rows.size() / dim;
  Standardizer s{std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
  if (n == 0) return s;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) s.mean[j] += rows[i * dim + j];
  }
  for (auto& m : s.mean) m /= static_cast<double>(n);
  std::vector<double> var(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = rows[i * dim + j] - s.mean[j];
      var[j] += d * d;
    }
  }
  for (std::size_t j = 0; j < dim; ++j) {
    const double sd = std::sqrt(var[j] / static_cast<double>(n));
    s.sd[j] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

void Standardizer::apply(std::span<double> rows) const {
  const std::size_t dim = mean.size();
  if (dim == 0 || rows.size() % dim != 0) throw DataError("standardizer: feature count mismatch");
  for (std::size_t i = 0; i < rows.size(); i += dim) {
    for (std::size_t j = 0; j < dim; ++j) rows[i + j] = (rows[i + j] - mean[j]) / sd[j];
  }
}

RankingData make_ranking_data(std::span<const FeatureRow> rows, std::optional<Role> role, bool require_gains) {
  RankingData d;
  const auto offsets = group_offsets(rows, [](const FeatureRow& r) {
    return std::tuple(static_cast<int>(r.role), r.features.user_id, r.session_id, r.serp_id);
  });
  for (std::size_t g = 0; g + 1 < offsets.size(); ++g) {
    if (role && rows[offsets[g]].role != *role) continue;
    for (std::size_t i = offsets[g]; i < offsets[g + 1]; ++i) {
      const auto& f = rows[i].features;
      if (!f.gain && require_gains) {
        throw DataError("unlabeled row for serp " + std::to_string(rows[i].serp_id) + " of user " +
                        std::to_string(f.user_id));
      }
      d.x.insert(d.x.end(), f.values.begin(), f.values.end());
      d.gains.push_back(f.gain.value_or(0));
      d.base_ranks.push_back(f.base_rank());
    }
    d.offsets.push_back(d.gains.size());
  }
  return d;
}

Network::Network(std::size_t inputs, std::size_t hidden)
    : inputs_(inputs), hidden_(hidden), params_(hidden * inputs + 2 * hidden + 1, 0.0) {}

void Network::init(std::uint64_t seed) {
  Rng rng(seed);
  const double a1 = std::sqrt(6.0 / static_cast<double>(inputs_ + hidden_));
  const double a2 = std::sqrt(6.0 / static_cast<double>(hidden_ + 1));
  std::fill(params_.begin(), params_.end(), 0.0);
  double* w1 = params_.data();
  double* w2 = w1 + hidden_ * inputs_ + hidden_;
  for (std::size_t i = 0; i < hidden_ * inputs_; ++i) w1[i] = (2.0 * rng.uniform() - 1.0) * a1;
  for (std::size_t h = 0; h < hidden_; ++h) w2[h] = (2.0 * rng.uniform() - 1.0) * a2;
}

double Network::forward(std::span<const double> x) const {
  double s = 0.0;
  forward_rows(x, 1, std::span<double>(&s, 1));
  return s;
}

void Network::forward_rows(std::span<const double> x, std::size_t n_rows, std::span<double> scores) const {
  const double* w1 = params_.data();
  const double* b1 = w1 + hidden_ * inputs_;
  const double* w2 = b1 + hidden_;
  const double b2 = w2[hidden_];
  for (std::size_t r = 0; r < n_rows; ++r) {
    const double* xr = x.data() + r * inputs_;
    double s = b2;
    for (std::size_t h = 0; h < hidden_; ++h) {
      const double* wh = w1 + h * inputs_;
      double z = b1[h];
      for (std::size_t j = 0; j < inputs_; ++j) z += wh[j] * xr[j];
      s += w2[h] * std::tanh(z);
    }
    scores[r] = s;
  }
}

void Network::backward(std::span<const double> x, std::size_t n_rows, std::span<const double> dscore,
                       std::span<double> grad) const {
  const double* w1 = params_.data();
  const double* b1 = w1 + hidden_ * inputs_;
  const double* w2 = b1 + hidden_;
  double* gw1 = grad.data();
  double* gb1 = gw1 + hidden_ * inputs_;
  double* gw2 = gb1 + hidden_;
  double* gb2 = gw2 + hidden_;
  for (std::size_t r = 0; r < n_rows; ++r) {
    const double ds = dscore[r];
    if (ds == 0.0) continue;
    const double* xr = x.data() + r * inputs_;
    *gb2 += ds;
    for (std::size_t h = 0; h < hidden_; ++h) {
      const double* wh = w1 + h * inputs_;
      double z = b1[h];
      for (std::size_t j = 0; j < inputs_; ++j) z += wh[j] * xr[j];
      const double a = std::tanh(z);
      gw2[h] += ds * a;
      const double dz = ds * w2[h] * (1.0 - a * a);
      gb1[h] += dz;
      double* gwh = gw1 + h * inputs_;
      for (std::size_t j = 0; j < inputs_; ++j) gwh[j] += dz * xr[j];
    }
  }
}

double regression_loss(std::span<const double> scores, std::span<const int> gains, std::span<double> grad) {
  const std::size_t n = scores.size();
  if (n == 0) return 0.0;
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = scores[i] - gains[i];
    loss += d * d;
    if (!grad.empty()) grad[i] = 2.0 * d / static_cast<double>(n);
  }
  return loss / static_cast<double>(n);
}

namespace {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log softmax, numerically stable.
template <typename T>
std::vector<double> log_softmax(std::span<const T> v) {
  double mx = -INFINITY;
  for (auto x : v) mx = std::max(mx, static_cast<double>(x));
  double z = 0.0;
  for (auto x : v) z += std::exp(static_cast<double>(x) - mx);
  const double lz = mx + std::log(z);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<double>(v[i]) - lz;
  return out;
}

}  // namespace

double ranknet_loss(std::span<const double> scores, std::span<const int> gains, std::span<double> grad) {
  const std::size_t n = scores.size();
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (gains[i] <= gains[j]) continue;
      const double diff = scores[i] - scores[j];
      loss += softplus(-diff);
      if (!grad.empty()) {
        const double g = sigmoid(-diff);
        grad[i] -= g;
        grad[j] += g;
      }
    }
  }
  return loss;
}

double listnet_loss(std::span<const double> scores, std::span<const int> gains, std::span<double> grad) {
  const std::size_t n = scores.size();
  if (n == 0) return 0.0;
  const auto log_py = log_softmax(gains);
  const auto log_ps = log_softmax(scores);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double py = std::exp(log_py[i]);
    loss -= py * log_ps[i];
    if (!grad.empty()) grad[i] = std::exp(log_ps[i]) - py;
  }
  return loss;
}

double query_loss(ModelKind kind, std::span<const double> scores, std::span<const int> gains,
                  std::span<double> grad) {
  switch (kind) {
    case ModelKind::Regression: return regression_loss(scores, gains, grad);
    case ModelKind::RankNet: return ranknet_loss(scores, gains, grad);
    case ModelKind::ListNet: return listnet_loss(scores, gains, grad);
    case ModelKind::Heuristic: break;
  }
  throw Error("heuristic model has no training objective");
}

double batch_objective(const Network& net, ModelKind kind, const RankingData& data, std::span<const std::size_t> batch,
                       std::span<double> grad, unsigned threads) {
  const std::size_t p = net.params().size();
  const bool want_grad = !grad.empty();
  if (want_grad && grad.size() != p) throw Error("gradient buffer has wrong size");
  std::vector<double> losses(batch.size(), 0.0);
  std::vector<double> buffers(want_grad ? batch.size() * p : 0, 0.0);
  parallel_for(batch.size(), threads, [&](std::size_t b) {
    const std::size_t q = batch[b];
    const std::size_t begin = data.offsets[q];
    const std::size_t n = data.offsets[q + 1] - begin;
    const std::span<const double> x(data.x.data() + begin * data.dim, n * data.dim);
    const std::span<const int> gains(data.gains.data() + begin, n);
    std::vector<double> s(n), ds(want_grad ? n : 0);
    net.forward_rows(x, n, s);
    losses[b] = query_loss(kind, s, gains, ds);
    if (want_grad) net.backward(x, n, ds, std::span<double>(buffers.data() + b * p, p));
  });
  const double scale = batch.empty() ? 0.0 : 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (double l : losses) loss += l;
  if (want_grad) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const double* buf = buffers.data() + b * p;
      for (std::size_t k = 0; k < p; ++k) grad[k] += buf[k];
    }
    for (auto& g : grad) g *= scale;
  }
  return loss * scale;
}

std::vector<int> heuristic_rerank(std::span<const double> c1_g1, std::span<const int> base_ranks) {
  return rank_by_score(c1_g1, base_ranks);
}

double mean_ndcg(const RankingData& data, std::span<const double> scores) {
  if (data.queries() == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t q = 0; q < data.queries(); ++q) {
    const std::size_t begin = data.offsets[q];
    const std::size_t n = data.offsets[q + 1] - begin;
    const auto order = rank_by_score(scores.subspan(begin, n), std::span(data.base_ranks).subspan(begin, n));
    sum += ndcg_at(order, std::span(data.gains).subspan(begin, n));
  }
  return sum / static_cast<double>(data.queries());
}

namespace {

RankingData standardized(const RankingData& d, const Standardizer& s) {
  RankingData out = d;
  if (!out.x.empty()) s.apply(out.x);
  return out;
}

}  // namespace

RankModel train(ModelKind kind, const RankingData& train_data, const RankingData& validation,
                const TrainParams& params) {
  if (train_data.queries() == 0) throw DataError("empty training set");
  if (train_data.dim == 0 || (validation.queries() > 0 && validation.dim != train_data.dim)) {
    throw DataError("training and validation rows differ in feature count");
  }
  RankModel model;
  model.kind = kind;
  model.params = params;
  model.standardizer = Standardizer::fit(train_data.x, train_data.dim);
  if (kind == ModelKind::Heuristic) {
    model.best_validation_ndcg = mean_ndcg(validation, score(model, validation));
    return model;
  }
  if (params.hidden == 0) throw ConfigError("hidden layer size must be positive");
  if (params.batch_queries == 0) throw ConfigError("batch size must be positive");

  const RankingData tr = standardized(train_data, model.standardizer);
  const RankingData va = standardized(validation, model.standardizer);
  const RankingData& monitor = va.queries() > 0 ? va : tr;

  Network net(train_data.dim, params.hidden);
  net.init(hash_combine(params.seed, 0x6e6574));
  Rng rng(hash_combine(params.seed, 0x6261746368));

  auto monitor_ndcg = [&] {
    std::vector<double> s(monitor.rows());
    net.forward_rows(monitor.x, monitor.rows(), s);
    return mean_ndcg(monitor, s);
  };

  std::vector<double> best = std::vector<double>(net.params().begin(), net.params().end());
  double best_ndcg = monitor_ndcg();
  int best_epoch = 0;
  int since_best = 0;
  int epoch = 0;
  std::vector<std::size_t> order(tr.queries());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(net.params().size());

  for (epoch = 1; epoch <= params.max_epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += params.batch_queries) {
      const std::size_t end = std::min(order.size(), start + params.batch_queries);
      const auto batch = std::span<const std::size_t>(order).subspan(start, end - start);
      const double loss = batch_objective(net, kind, tr, batch, grad, params.threads);
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << model_kind_name(kind) << " training diverged: loss " << loss << " at epoch " << epoch
            << ", batch starting at query " << start << " (learning rate " << params.learning_rate << ")";
        throw TrainingError(msg.str());
      }
      auto w = net.params();
      for (std::size_t k = 0; k < w.size(); ++k) w[k] -= params.learning_rate * grad[k];
    }
    const double ndcg = monitor_ndcg();
    if (ndcg > best_ndcg) {
      best_ndcg = ndcg;
      best_epoch = epoch;
      since_best = 0;
      std::copy(net.params().begin(), net.params().end(), best.begin());
    } else if (++since_best >= params.patience) {
      break;
    }
  }
  std::copy(best.begin(), best.end(), net.params().begin());
  model.network = std::move(net);
  model.epochs_run = std::min(epoch, params.max_epochs);
  model.best_epoch = best_epoch;
  model.best_validation_ndcg = best_ndcg;
  return model;
}

std::vector<double> score(const RankModel& model, const RankingData& data) {
  const std::size_t expected = model.kind == ModelKind::Heuristic ? model.standardizer.dim() : model.network.inputs();
  if (data.dim == 0 || (expected != 0 && data.dim != expected)) {
    throw DataError("feature count mismatch: model expects " + std::to_string(expected) + ", got " +
                    std::to_string(data.dim));
  }
  std::vector<double> s(data.rows());
  if (model.kind == ModelKind::Heuristic) {
    for (std::size_t i = 0; i < data.rows(); ++i) s[i] = data.x[i * data.dim];
    return s;
  }
  std::vector<double> x = data.x;
  model.standardizer.apply(x);
  model.network.forward_rows(x, data.rows(), s);
  return s;
}

void save_model(const std::filesystem::path& path, const RankModel& model) {
  nlohmann::json j;
  j["format"] = "ctxrank-model";
  j["version"] = 1;
  j["kind"] = std::string(model_kind_name(model.kind));
  j["inputs"] = model.network.inputs();
  j["hidden"] = model.network.hidden();
  j["params"] = std::vector<double>(model.network.params().begin(), model.network.params().end());
  j["standardizer"] = {{"mean", model.standardizer.mean}, {"sd", model.standardizer.sd}};
  j["metadata"] = {{"seed", model.params.seed},
                   {"hidden", model.params.hidden},
                   {"learning_rate", model.params.learning_rate},
                   {"max_epochs", model.params.max_epochs},
                   {"patience", model.params.patience},
                   {"batch_queries", model.params.batch_queries},
                   {"epochs_run", model.epochs_run},
                   {"best_epoch", model.best_epoch},
                   {"best_validation_ndcg", model.best_validation_ndcg}};
  io::atomic_write(path, [&](std::ostream& out) { out << j.dump(1) << '\n'; });
}

RankModel load_model(const std::filesystem::path& path) {
  io::require_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": not a model file (" + e.what() + ")");
  }
  try {
    if (j.at("format") != "ctxrank-model" || j.at("version") != 1) {
      throw DataError(path.string() + ": unsupported model format");
    }
    RankModel m;
    m.kind = parse_model_kind(j.at("kind").get<std::string>());
    const auto inputs = j.at("inputs").get<std::size_t>();
    const auto hidden = j.at("hidden").get<std::size_t>();
    if (m.kind != ModelKind::Heuristic) {
      m.network = Network(inputs, hidden);
      const auto params = j.at("params").get<std::vector<double>>();
      if (params.size() != m.network.params().size()) throw DataError(path.string() + ": weight count mismatch");
      std::copy(params.begin(), params.end(), m.network.params().begin());
    }
    m.standardizer.mean = j.at("standardizer").at("mean").get<std::vector<double>>();
    m.standardizer.sd = j.at("standardizer").at("sd").get<std::vector<double>>();
    if (m.standardizer.mean.size() != m.standardizer.sd.size()) {
      throw DataError(path.string() + ": inconsistent standardizer");
    }
    const auto& md = j.at("metadata");
    m.params.seed = md.at("seed").get<std::uint64_t>();
    m.params.hidden = md.at("hidden").get<std::size_t>();
    m.params.learning_rate = md.at("learning_rate").get<double>();
    m.params.max_epochs = md.at("max_epochs").get<int>();
    m.params.patience = md.at("patience").get<int>();
    m.params.batch_queries = md.at("batch_queries").get<std::size_t>();
    m.epochs_run = md.at("epochs_run").get<int>();
    m.best_epoch = md.at("best_epoch").get<int>();
    m.best_validation_ndcg = md.at("best_validation_ndcg").get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed model file (" + e.what() + ")");
  }
}

}  // namespace ctxrank
