#include "ctxrank/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "ctxrank/context_index.hpp"
#include "ctxrank/features.hpp"
#include "ctxrank/io.hpp"
#include "ctxrank/log_model.hpp"
#include "ctxrank/score_file.hpp"

namespace ctxrank {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::vector<Session> load_checked(const fs::path& sessions) {
  io::require_file(sessions);
  return load_sessions(sessions);
}

std::vector<ScoreRow> load_scores(const fs::path& path) {
  io::require_file(path);
  return read_scores(path);
}

std::vector<FeatureRow> load_features(const fs::path& path) {
  io::require_file(path);
  return read_features(path);
}

}  // namespace

PipelineConfig PipelineConfig::from(const KeyValueConfig& cfg) {
  PipelineConfig p;
  p.effective = cfg;
  p.work_dir = cfg.get_string("work_dir", p.work_dir.string());
  p.train_days = static_cast<int>(cfg.get_int("train_days", p.train_days));
  p.truncation = static_cast<int>(cfg.get_int("truncation", p.truncation));
  const auto threads = cfg.get_int("threads", p.threads);
  if (threads < 0) throw ConfigError("threads must be >= 0");
  p.threads = static_cast<unsigned>(threads);
  p.partition_seed = cfg.get_uint("seed.partition", p.partition_seed);
  p.train_seed = cfg.get_uint("seed.train", p.train_seed);
  p.blend_seed = cfg.get_uint("seed.blend", p.blend_seed);
  p.eval_seed = cfg.get_uint("seed.eval", p.eval_seed);

  const auto hidden = cfg.get_int("train.hidden", static_cast<std::int64_t>(p.train.hidden));
  if (hidden < 10 || hidden > 200) throw ConfigError("train.hidden must be in [10, 200]");
  p.train.hidden = static_cast<std::size_t>(hidden);
  p.train.learning_rate = cfg.get_double("train.learning_rate", p.train.learning_rate);
  if (!(p.train.learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
  p.train.max_epochs = static_cast<int>(cfg.get_int("train.max_epochs", p.train.max_epochs));
  if (p.train.max_epochs < 0) throw ConfigError("train.max_epochs must be >= 0");
  p.train.patience = static_cast<int>(cfg.get_int("train.patience", p.train.patience));
  if (p.train.patience < 1) throw ConfigError("train.patience must be >= 1");
  const auto batch = cfg.get_int("train.batch_queries", static_cast<std::int64_t>(p.train.batch_queries));
  if (batch < 1) throw ConfigError("train.batch_queries must be >= 1");
  p.train.batch_queries = static_cast<std::size_t>(batch);
  p.train.seed = p.train_seed;
  p.train.threads = p.threads;

  p.blend.learning_rate = cfg.get_double("blend.learning_rate", p.blend.learning_rate);
  p.blend.iterations = static_cast<int>(cfg.get_int("blend.iterations", p.blend.iterations));
  if (!(p.blend.learning_rate > 0.0) || p.blend.iterations < 0) throw ConfigError("invalid blend settings");

  p.gen = GenConfig::from_config(cfg);
  p.gen.validate();
  if (p.train_days < 1) throw ConfigError("train_days must be >= 1");
  if (p.truncation < 1) throw ConfigError("truncation must be >= 1");
  return p;
}

fs::path PipelineConfig::model_path(ModelKind k) const {
  return work_dir / ("model_" + std::string(model_kind_name(k)) + ".json");
}

fs::path PipelineConfig::scores_path(ModelKind k) const {
  return work_dir / ("scores_" + std::string(model_kind_name(k)) + ".csv");
}

fs::path manifest_path(const fs::path& artifact) {
  fs::path p = artifact;
  p += ".manifest.json";
  return p;
}

void write_manifest(const fs::path& artifact, const RunManifest& run, const PipelineConfig& cfg) {
  nlohmann::ordered_json j;
  j["command"] = run.command;
  j["version"] = kVersion;
  auto& inputs = j["inputs"] = nlohmann::ordered_json::array();
  for (const auto& in : run.inputs) {
    std::ostringstream fp;
    fp << std::hex << io::file_fingerprint(in);
    inputs.push_back({{"path", in.string()}, {"fnv1a64", fp.str()}});
  }
  auto& outputs = j["outputs"] = nlohmann::ordered_json::array();
  for (const auto& out : run.outputs) outputs.push_back(out.string());
  j["seeds"] = {{"partition", cfg.partition_seed},
                {"train", cfg.train_seed},
                {"blend", cfg.blend_seed},
                {"eval", cfg.eval_seed},
                {"gen", cfg.gen.rng_seed}};
  auto& config = j["config"] = nlohmann::ordered_json::object();
  KeyValueConfig effective = cfg.effective;
  cfg.gen.to_config(effective);
  for (const auto& [k, v] : effective.values()) config[k] = v;
  auto& results = j["results"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : run.results) results[k] = v;
  j["wall_seconds"] = run.wall_seconds;
  io::atomic_write(manifest_path(artifact), [&](std::ostream& out) { out << j.dump(2) << '\n'; });
}

GenStats run_gen(const PipelineConfig& cfg, const fs::path& out) {
  const auto start = Clock::now();
  ensure_parent(out);
  GenStats stats;
  io::atomic_write(out, [&](std::ostream& os) { stats = generate(cfg.gen, os); });
  RunManifest m{"gen", {}, {out}, {}, seconds_since(start)};
  m.results = {{"records", std::to_string(stats.records)},
               {"sessions", std::to_string(stats.sessions)},
               {"training_sessions", std::to_string(stats.training_sessions)},
               {"test_sessions", std::to_string(stats.test_sessions)},
               {"impressions", std::to_string(stats.impressions)},
               {"test_queries", std::to_string(stats.test_queries)},
               {"clicks", std::to_string(stats.clicks)},
               {"training_clicks", std::to_string(stats.training_clicks)},
               {"users", std::to_string(stats.users)},
               {"unique_queries", std::to_string(stats.unique_queries)},
               {"unique_documents", std::to_string(stats.unique_documents)}};
  write_manifest(out, m, cfg);
  return stats;
}

std::size_t run_parse(const PipelineConfig& cfg, const fs::path& log, const fs::path& out) {
  const auto start = Clock::now();
  io::require_file(log);
  const auto records = parse_log_file(log);
  auto sessions = sessionize(records);
  label_sessions(sessions);
  ensure_parent(out);
  save_sessions(out, sessions);
  write_manifest(out,
                 {"parse",
                  {log},
                  {out},
                  {{"records", std::to_string(records.size())}, {"sessions", std::to_string(sessions.size())}},
                  seconds_since(start)},
                 cfg);
  return sessions.size();
}

TargetSet run_partition(const PipelineConfig& cfg, const fs::path& sessions_path, const fs::path& out) {
  const auto start = Clock::now();
  const auto sessions = load_checked(sessions_path);
  const auto targets = select_targets(sessions, cfg.train_days, cfg.partition_seed);
  ensure_parent(out);
  write_targets(out, targets);
  write_manifest(out,
                 {"partition",
                  {sessions_path},
                  {out},
                  {{"train", std::to_string(targets.train.size())},
                   {"validation", std::to_string(targets.validation.size())},
                   {"test", std::to_string(targets.test.size())},
                   {"skipped_users", std::to_string(targets.skipped_users)}},
                  seconds_since(start)},
                 cfg);
  return targets;
}

void run_index(const PipelineConfig& cfg, const fs::path& sessions_path, const fs::path& out) {
  const auto start = Clock::now();
  const auto sessions = load_checked(sessions_path);
  const auto order = SessionOrder::build(sessions, cfg.partition_seed);
  const auto index = ContextIndex::build(sessions, order, cfg.train_days);
  ensure_parent(out);
  index.save(out);
  write_manifest(out,
                 {"index",
                  {sessions_path},
                  {out},
                  {{"occurrences", std::to_string(index.occurrences().size())}},
                  seconds_since(start)},
                 cfg);
}

void run_lookup(const fs::path& index_path, QueryId query, std::ostream& out) {
  io::require_file(index_path);
  const auto index = ContextIndex::load(index_path);
  const auto occ = index.lookup(query);
  out << "query " << query << ": " << occ.size() << " occurrences\n";
  for (const Occurrence* o : occ) {
    out << "user " << o->user_id << " session " << o->session_id << " serp " << o->serp_id << " day " << o->key.day
        << " docs";
    for (std::size_t i = 0; i < kSerpSize; ++i) {
      out << ' ' << o->documents[i] << ':' << static_cast<int>(o->gains[i]) << (o->clicked(i) ? "*" : "");
    }
    out << '\n';
  }
}

std::size_t run_extract(const PipelineConfig& cfg, const fs::path& sessions_path, const fs::path& targets_path,
                        const fs::path& index_path, const fs::path& out) {
  const auto start = Clock::now();
  io::require_file(targets_path);
  io::require_file(index_path);
  Corpus corpus(load_checked(sessions_path));
  const auto targets = read_targets(targets_path);
  const auto index = ContextIndex::load(index_path);
  const auto order = SessionOrder::build(corpus.sessions(), index.order_seed());
  const auto rows = extract_targets(corpus, order, index, targets, cfg.threads);
  ensure_parent(out);
  write_features(out, rows);
  write_manifest(out,
                 {"extract",
                  {sessions_path, targets_path, index_path},
                  {out},
                  {{"rows", std::to_string(rows.size())}},
                  seconds_since(start)},
                 cfg);
  return rows.size();
}

RankModel run_train(const PipelineConfig& cfg, ModelKind kind, const fs::path& features, const fs::path& out) {
  const auto start = Clock::now();
  const auto rows = load_features(features);
  const auto train_data = make_ranking_data(rows, Role::Train, true);
  const auto validation = make_ranking_data(rows, Role::Validation, true);
  const auto model = train(kind, train_data, validation, cfg.train);
  ensure_parent(out);
  save_model(out, model);
  write_manifest(out,
                 {"train",
                  {features},
                  {out},
                  {{"kind", std::string(model_kind_name(kind))},
                   {"train_queries", std::to_string(train_data.queries())},
                   {"validation_queries", std::to_string(validation.queries())},
                   {"epochs_run", std::to_string(model.epochs_run)},
                   {"best_epoch", std::to_string(model.best_epoch)},
                   {"best_validation_ndcg", io::format_double(model.best_validation_ndcg)}},
                  seconds_since(start)},
                 cfg);
  return model;
}

void run_score(const PipelineConfig& cfg, const fs::path& model_path, const fs::path& features, const fs::path& out) {
  const auto start = Clock::now();
  const auto model = load_model(model_path);
  const auto rows = load_features(features);
  const auto data = make_ranking_data(rows, std::nullopt, false);
  const auto scores = score(model, data);
  std::vector<ScoreRow> out_rows(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    out_rows[i] = ScoreRow{r.role,           r.features.user_id, r.session_id,   r.serp_id, r.features.query_id,
                           r.features.doc_id, r.features.base_rank(), r.features.gain, scores[i]};
  }
  ensure_parent(out);
  write_scores(out, out_rows);
  write_manifest(out, {"score", {model_path, features}, {out}, {{"rows", std::to_string(rows.size())}},
                       seconds_since(start)},
                 cfg);
}

BlendModel run_blend(const PipelineConfig& cfg, BlendMethod method, const std::vector<fs::path>& scores,
                     const fs::path& manifest_out, const fs::path& scores_out) {
  const auto start = Clock::now();
  if (scores.empty()) throw ConfigError("blend needs at least one score file");
  std::vector<std::vector<ScoreRow>> files;
  for (const auto& p : scores) files.push_back(load_scores(p));
  const auto& ref = files.front();
  MemberScores members;
  std::vector<std::string> names;
  for (std::size_t m = 0; m < files.size(); ++m) {
    const auto& f = files[m];
    if (f.size() != ref.size()) {
      throw DataError(scores[m].string() + " has " + std::to_string(f.size()) + " rows, expected " +
                      std::to_string(ref.size()));
    }
    std::vector<double> s(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
      const auto& a = f[i];
      const auto& b = ref[i];
      if (a.role != b.role || a.user_id != b.user_id || a.session_id != b.session_id || a.serp_id != b.serp_id ||
          a.doc_id != b.doc_id) {
        throw DataError(scores[m].string() + " row " + std::to_string(i + 2) + " does not match " +
                        scores.front().string());
      }
      s[i] = a.score;
    }
    members.push_back(std::move(s));
    names.push_back(scores[m].string());
  }

  BlendModel model;
  if (method == BlendMethod::Average) {
    model = fit_average(members, names);
  } else {
    BlendPool pool;
    const auto offsets = target_offsets(ref);
    for (std::size_t g = 0; g + 1 < offsets.size(); ++g) {
      bool labeled = ref[offsets[g]].role == Role::Validation;
      for (std::size_t i = offsets[g]; i < offsets[g + 1]; ++i) {
        pool.gains.push_back(ref[i].gain.value_or(0));
        pool.base_ranks.push_back(ref[i].base_rank);
        labeled = labeled && ref[i].gain.has_value();
      }
      pool.offsets.push_back(pool.gains.size());
      pool.fit_eligible.push_back(labeled);
    }
    model = blend_learned(members, names, pool, cfg.blend_seed, cfg.blend);
  }
  const auto blended = apply_blend(model, members);
  std::vector<ScoreRow> out_rows = ref;
  for (std::size_t i = 0; i < out_rows.size(); ++i) out_rows[i].score = blended[i];
  ensure_parent(manifest_out);
  ensure_parent(scores_out);
  save_blend(manifest_out, model);
  write_scores(scores_out, out_rows);
  RunManifest run{"blend", scores, {manifest_out, scores_out}, {{"method", std::string(blend_method_name(method))}},
                  seconds_since(start)};
  if (method == BlendMethod::Learned) {
    run.results.emplace_back("holdout_ndcg_learned", io::format_double(model.holdout_ndcg_learned));
    run.results.emplace_back("holdout_ndcg_average", io::format_double(model.holdout_ndcg_average));
  }
  write_manifest(scores_out, run, cfg);
  return model;
}

EvalReport run_eval(const PipelineConfig& cfg, const fs::path& scores, std::optional<Role> role, const fs::path& out_dir) {
  const auto start = Clock::now();
  const auto rows = load_scores(scores);
  const auto report = evaluate_run(rows, role, cfg.eval_seed, cfg.truncation);
  fs::create_directories(out_dir);
  write_report_csv(out_dir / "queries.csv", report);
  write_summary(out_dir / "summary.csv", report);
  write_manifest(out_dir / "summary.csv",
                 {"eval",
                  {scores},
                  {out_dir / "queries.csv", out_dir / "summary.csv"},
                  {{"role", role ? std::string(role_name(*role)) : "all"},
                   {"queries", std::to_string(report.queries.size())},
                   {"mean_ndcg", io::format_double(report.mean_ndcg)}},
                  seconds_since(start)},
                 cfg);
  return report;
}

EvalReport run_analyze(const PipelineConfig& cfg, const fs::path& scores, std::optional<Role> role, std::size_t bins,
                       const fs::path& out_dir) {
  const auto start = Clock::now();
  const auto rows = load_scores(scores);
  const auto report = evaluate_run(rows, role, cfg.eval_seed, cfg.truncation);
  std::vector<double> tau, delta;
  for (const auto& q : report.queries) {
    tau.push_back(q.tau);
    delta.push_back(q.delta_ndcg);
  }
  fs::create_directories(out_dir);
  write_histogram(out_dir / "tau.csv", histogram(tau, -1.0, 1.0, bins));
  write_histogram(out_dir / "delta_ndcg.csv", histogram(delta, -1.0, 1.0, bins));
  write_manifest(out_dir / "tau.csv",
                 {"analyze",
                  {scores},
                  {out_dir / "tau.csv", out_dir / "delta_ndcg.csv"},
                  {{"queries", std::to_string(report.queries.size())},
                   {"frac_tau_ge_0.7", io::format_double(report.frac_tau_at_least_07)}},
                  seconds_since(start)},
                 cfg);
  return report;
}

LogStats run_stats(const PipelineConfig& cfg, const fs::path& sessions_path, const fs::path& out) {
  const auto start = Clock::now();
  const auto sessions = load_checked(sessions_path);
  const auto stats = compute_stats(sessions, cfg.train_days);
  ensure_parent(out);
  io::atomic_write(out, [&](std::ostream& os) {
    os << "key,value\n";
    os << "records," << stats.records << '\n';
    os << "unique_users," << stats.unique_users << '\n';
    os << "unique_queries," << stats.unique_queries << '\n';
    os << "unique_documents," << stats.unique_documents << '\n';
    os << "training_sessions," << stats.training_sessions << '\n';
    os << "test_sessions," << stats.test_sessions << '\n';
    os << "impressions," << stats.impressions << '\n';
    os << "clicks," << stats.clicks << '\n';
    os << "training_clicks," << stats.training_clicks << '\n';
    for (auto g : {Grade::NoClick, Grade::R0, Grade::R1, Grade::R2}) {
      os << "training_" << grade_name(g) << ',' << stats.training_labels[static_cast<std::size_t>(g)] << '\n';
    }
    for (auto g : {Grade::NoClick, Grade::R0, Grade::R1, Grade::R2}) {
      os << "test_period_" << grade_name(g) << ',' << stats.test_period_labels[static_cast<std::size_t>(g)] << '\n';
    }
  });
  write_manifest(out, {"stats", {sessions_path}, {out}, {}, seconds_since(start)}, cfg);
  return stats;
}

}  // namespace ctxrank
