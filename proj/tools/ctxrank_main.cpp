#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ctxrank/common.hpp"
#include "ctxrank/config.hpp"
#include "ctxrank/io.hpp"
#include "ctxrank/pipeline.hpp"
#include "ctxrank/synthgen.hpp"

namespace fs = std::filesystem;
using namespace ctxrank;

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

std::optional<Role> parse_role_filter(const std::string& s) {
  if (s == "all") return std::nullopt;
  return parse_role(s);
}

fs::path or_default(const std::string& flag, const fs::path& fallback) {
  return flag.empty() ? fallback : fs::path(flag);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ctxrank: context-feature personalization of search logs"};
  app.require_subcommand(1);

  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<int> threads;
  std::string work_dir;
  app.add_option("--config", config_file, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "override a config key (key=value), repeatable");
  app.add_option("--threads", threads, "worker cap, 0 = all cores");
  app.add_option("--work-dir", work_dir, "directory for default artifact paths");

  // gen
  auto* gen = app.add_subcommand("gen", "write a synthetic challenge-format log");
  std::string gen_out;
  bool gen_stdout = false;
  std::optional<std::uint64_t> gen_seed;
  gen->add_option("--out", gen_out, "output log path");
  gen->add_flag("--stdout", gen_stdout, "write the log to standard output");
  gen->add_option("--seed", gen_seed, "generator seed (gen.seed)");

  // parse
  auto* parse = app.add_subcommand("parse", "parse and label a log into the session cache");
  std::string parse_log, parse_out;
  parse->add_option("--log", parse_log, "input log (plain or gzip)");
  parse->add_option("--out", parse_out, "session cache path");

  // partition
  auto* partition = app.add_subcommand("partition", "select train/validation/test targets");
  std::string part_sessions, part_out;
  partition->add_option("--sessions", part_sessions, "session cache");
  partition->add_option("--out", part_out, "targets CSV");

  // index
  auto* index = app.add_subcommand("index", "build the query/user context index");
  std::string idx_sessions, idx_out;
  index->add_option("--sessions", idx_sessions, "session cache");
  index->add_option("--out", idx_out, "index path");

  // lookup
  auto* lookup = app.add_subcommand("lookup", "dump indexed occurrences of a query");
  std::string lk_index;
  QueryId lk_query = 0;
  lookup->add_option("--index", lk_index, "index path");
  lookup->add_option("--query", lk_query, "query id")->required();

  // extract
  auto* extract = app.add_subcommand("extract", "extract 121 features for every target");
  std::string ex_sessions, ex_targets, ex_index, ex_out;
  extract->add_option("--sessions", ex_sessions, "session cache");
  extract->add_option("--targets", ex_targets, "targets CSV");
  extract->add_option("--index", ex_index, "index path");
  extract->add_option("--out", ex_out, "features CSV");

  // train
  auto* train_cmd = app.add_subcommand("train", "train a ranking model");
  std::string tr_kind, tr_features, tr_out;
  std::optional<int> tr_hidden, tr_epochs;
  std::optional<double> tr_lr;
  std::optional<std::uint64_t> tr_seed;
  train_cmd->add_option("--kind", tr_kind, "heuristic, regression, ranknet or listnet")->required();
  train_cmd->add_option("--features", tr_features, "features CSV");
  train_cmd->add_option("--out", tr_out, "model path");
  train_cmd->add_option("--hidden", tr_hidden, "hidden units (train.hidden)");
  train_cmd->add_option("--lr", tr_lr, "learning rate (train.learning_rate)");
  train_cmd->add_option("--epochs", tr_epochs, "maximum epochs (train.max_epochs)");
  train_cmd->add_option("--seed", tr_seed, "training seed (seed.train)");

  // score
  auto* score_cmd = app.add_subcommand("score", "score feature rows with a model");
  std::string sc_model, sc_kind, sc_features, sc_out;
  score_cmd->add_option("--model", sc_model, "model path");
  score_cmd->add_option("--kind", sc_kind, "use the default model/score paths of this kind");
  score_cmd->add_option("--features", sc_features, "features CSV");
  score_cmd->add_option("--out", sc_out, "scores CSV");

  // blend
  auto* blend = app.add_subcommand("blend", "blend standardized scores of several models");
  std::string bl_method = "average", bl_manifest, bl_out;
  std::vector<std::string> bl_scores;
  blend->add_option("--method", bl_method, "average or learned")->check(CLI::IsMember({"average", "learned"}));
  blend->add_option("--scores", bl_scores, "member score files")->required()->expected(1, -1);
  blend->add_option("--manifest", bl_manifest, "blend manifest path");
  blend->add_option("--out", bl_out, "blended scores CSV");

  // eval
  auto* eval = app.add_subcommand("eval", "NDCG@T and Kendall tau report");
  std::string ev_scores, ev_role = "validation", ev_out;
  eval->add_option("--scores", ev_scores, "scores CSV")->required();
  eval->add_option("--role", ev_role, "train, validation, test or all")
      ->check(CLI::IsMember({"train", "validation", "test", "all"}));
  eval->add_option("--out-dir", ev_out, "report directory");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Kendall tau and delta-NDCG histograms");
  std::string an_scores, an_role = "validation", an_out;
  std::size_t an_bins = 20;
  analyze->add_option("--scores", an_scores, "scores CSV")->required();
  analyze->add_option("--role", an_role, "train, validation, test or all")
      ->check(CLI::IsMember({"train", "validation", "test", "all"}));
  analyze->add_option("--bins", an_bins, "histogram bins")->check(CLI::PositiveNumber);
  analyze->add_option("--out-dir", an_out, "histogram directory");

  // stats
  auto* stats = app.add_subcommand("stats", "dataset counts and label distribution");
  std::string st_sessions, st_out;
  bool st_stdout = false;
  stats->add_option("--sessions", st_sessions, "session cache");
  stats->add_option("--out", st_out, "stats CSV");
  stats->add_flag("--stdout", st_stdout, "also print the report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    KeyValueConfig kv;
    if (!config_file.empty()) kv = KeyValueConfig::load(config_file);
    for (const auto& o : overrides) kv.set_assignment(o);
    if (threads) kv.set("threads", std::to_string(*threads));
    if (!work_dir.empty()) kv.set("work_dir", work_dir);
    if (gen_seed) kv.set("gen.seed", std::to_string(*gen_seed));
    if (tr_hidden) kv.set("train.hidden", std::to_string(*tr_hidden));
    if (tr_lr) kv.set("train.learning_rate", io::format_double(*tr_lr));
    if (tr_epochs) kv.set("train.max_epochs", std::to_string(*tr_epochs));
    if (tr_seed) kv.set("seed.train", std::to_string(*tr_seed));
    const PipelineConfig cfg = PipelineConfig::from(kv);

    if (*gen) {
      if (gen_stdout) {
        generate(cfg.gen, std::cout);
      } else {
        const auto out = or_default(gen_out, cfg.log_path());
        const auto s = run_gen(cfg, out);
        std::cerr << "wrote " << s.records << " records to " << out.string() << '\n';
      }
    } else if (*parse) {
      const auto out = or_default(parse_out, cfg.sessions_path());
      const auto n = run_parse(cfg, or_default(parse_log, cfg.log_path()), out);
      std::cerr << "wrote " << n << " sessions to " << out.string() << '\n';
    } else if (*partition) {
      const auto out = or_default(part_out, cfg.targets_path());
      const auto t = run_partition(cfg, or_default(part_sessions, cfg.sessions_path()), out);
      std::cerr << "targets: " << t.train.size() << " train, " << t.validation.size() << " validation, "
                << t.test.size() << " test\n";
    } else if (*index) {
      run_index(cfg, or_default(idx_sessions, cfg.sessions_path()), or_default(idx_out, cfg.index_path()));
    } else if (*lookup) {
      run_lookup(or_default(lk_index, cfg.index_path()), lk_query, std::cout);
    } else if (*extract) {
      const auto n = run_extract(cfg, or_default(ex_sessions, cfg.sessions_path()),
                                 or_default(ex_targets, cfg.targets_path()), or_default(ex_index, cfg.index_path()),
                                 or_default(ex_out, cfg.features_path()));
      std::cerr << "extracted " << n << " feature rows\n";
    } else if (*train_cmd) {
      const auto kind = parse_model_kind(tr_kind);
      const auto m = run_train(cfg, kind, or_default(tr_features, cfg.features_path()),
                               or_default(tr_out, cfg.model_path(kind)));
      std::cerr << model_kind_name(kind) << ": best validation NDCG@10 " << m.best_validation_ndcg << " at epoch "
                << m.best_epoch << " of " << m.epochs_run << '\n';
    } else if (*score_cmd) {
      fs::path model = sc_model, out = sc_out;
      if (!sc_kind.empty()) {
        const auto kind = parse_model_kind(sc_kind);
        if (model.empty()) model = cfg.model_path(kind);
        if (out.empty()) out = cfg.scores_path(kind);
      }
      if (model.empty()) throw ConfigError("score needs --model or --kind");
      if (out.empty()) throw ConfigError("score needs --out or --kind");
      run_score(cfg, model, or_default(sc_features, cfg.features_path()), out);
    } else if (*blend) {
      std::vector<fs::path> inputs(bl_scores.begin(), bl_scores.end());
      const auto m = run_blend(cfg, parse_blend_method(bl_method), inputs, or_default(bl_manifest, cfg.blend_path()),
                               or_default(bl_out, cfg.blend_scores_path()));
      if (m.method == BlendMethod::Learned) {
        std::cerr << "holdout NDCG@10: learned " << m.holdout_ndcg_learned << ", average " << m.holdout_ndcg_average
                  << '\n';
      }
    } else if (*eval) {
      const auto r = run_eval(cfg, ev_scores, parse_role_filter(ev_role), or_default(ev_out, cfg.report_dir()));
      std::cout << "queries " << r.queries.size() << "\nmean_ndcg " << r.mean_ndcg << "\nmean_base_ndcg "
                << r.mean_base_ndcg << "\nmean_delta_ndcg " << r.mean_delta << '\n';
    } else if (*analyze) {
      const auto r = run_analyze(cfg, an_scores, parse_role_filter(an_role), an_bins,
                                 or_default(an_out, cfg.report_dir()));
      std::cout << "queries " << r.queries.size() << "\nfrac_tau_ge_0.7 " << r.frac_tau_at_least_07 << '\n';
    } else if (*stats) {
      const auto out = or_default(st_out, cfg.stats_path());
      run_stats(cfg, or_default(st_sessions, cfg.sessions_path()), out);
      if (st_stdout) std::cout << io::read_text(out);
    }
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kData;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}
