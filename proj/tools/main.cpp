#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "rwce/evaluation.hpp"
#include "rwce/run_io.hpp"
#include "rwce/serialize.hpp"

namespace fs = std::filesystem;
using namespace rwce;

namespace {

// Exit codes are a stable scripting contract:
//   0 ok, 2 config, 3 numeric abort, 4 missing artifact, 5 theorem violation.
// A partially failed sweep exits 1 (some cells completed).
constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitMissing = 4;
constexpr int kExitTheorem = 5;

struct TheoremViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void log_event(const Json& j) { std::cerr << j.dump() << '\n'; }

fs::path resolve_out(const fs::path& path) {
  const char* root = std::getenv("RWCE_OUT_ROOT");
  if (root != nullptr && *root != '\0' && path.is_relative()) return fs::path(root) / path;
  return path;
}

fs::path dataset_file(const fs::path& data_arg) {
  if (fs::is_directory(data_arg)) return data_arg / "dataset.csv";
  return data_arg;
}

SplitDataset load_dataset(const fs::path& data_arg) {
  const fs::path file = dataset_file(data_arg);
  if (!fs::exists(file)) throw MissingArtifactError("data: no dataset at " + file.string());
  CsvSchema schema;
  schema.standardize = true;
  return load_csv(file, schema);
}

void write_manifest(const fs::path& out_dir, const std::string& command, const Json& config,
                    const Json& inputs, const Json& outputs, const Json& seeds, double seconds) {
  Json manifest;
  manifest["command"] = command;
  manifest["tool_version"] = kToolVersion;
  manifest["config"] = config;
  manifest["inputs"] = inputs;
  manifest["outputs"] = outputs;
  manifest["seeds"] = seeds;
  manifest["duration_seconds"] = seconds;
  write_json_file(manifest, out_dir / "manifest.json");
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

int cmd_gen_data(const fs::path& config_path, const fs::path& out_arg, bool dry_run) {
  const Json config_json = read_json_file(config_path);
  const SyntheticSpec spec = synthetic_spec_from_json(config_json);
  if (dry_run) {
    log_event({{"event", "dry_run"}, {"command", "gen-data"}});
    return kExitOk;
  }
  Stopwatch watch;
  const fs::path out_dir = resolve_out(out_arg);
  fs::create_directories(out_dir);
  const SplitDataset data = generate_synthetic(spec);
  save_csv(data, out_dir / "dataset.csv");
  write_manifest(out_dir, "gen-data", synthetic_spec_to_json(spec),
                 {{"config", config_path.string()}},
                 {{"dataset", (out_dir / "dataset.csv").string()}}, {{"seed", spec.seed}},
                 watch.seconds());
  log_event({{"event", "gen_data_done"},
             {"rows", data.total_size()},
             {"out", (out_dir / "dataset.csv").string()}});
  return kExitOk;
}

int cmd_train(const fs::path& config_path, const fs::path& data_arg, const fs::path& out_arg,
              bool dry_run) {
  const Json config_json = read_json_file(config_path);
  const TrainingConfig config = training_config_from_json(config_json);
  const fs::path data_file = dataset_file(data_arg);
  if (!fs::exists(data_file)) throw MissingArtifactError("data: no dataset at " + data_file.string());
  if (dry_run) {
    log_event({{"event", "dry_run"}, {"command", "train"}});
    return kExitOk;
  }
  Stopwatch watch;
  const SplitDataset data = load_dataset(data_arg);
  const fs::path run_dir = resolve_out(out_arg);
  fs::create_directories(run_dir);
  const TrainingRun run = train_to_dir(config, data, run_dir, [](const StepEvent& event) {
    if (event.step_in_epoch == 0)
      log_event({{"event", "epoch_start"}, {"epoch", event.epoch}});
  });
  write_manifest(run_dir, "train", training_config_to_json(run.config),
                 {{"config", config_path.string()}, {"data", data_file.string()}},
                 {{"run_dir", run_dir.string()}},
                 {{"init", config.seeds.init},
                  {"shuffle", config.seeds.shuffle},
                  {"tie_break", config.seeds.tie_break}},
                 watch.seconds());
  log_event({{"event", "train_done"},
             {"epochs", run.epochs_done},
             {"final_loss", run.trace.empty() ? 0.0 : run.trace.back().loss}});
  return kExitOk;
}

Json evaluate_score(const ModelParams& model, const SplitDataset& data, const ScoreSpec& spec,
                    double alpha, const fs::path& out_dir, const std::string& checkpoint) {
  const ConformalPredictor predictor = calibrate(model, spec, data.cal.x, data.cal.y, alpha);
  const auto sets = predict_sets(predictor, model, data.test.x);
  const std::string kind = score_kind_name(spec.kind);

  write_json_file(predictor_to_json(predictor, checkpoint),
                  out_dir / ("predictor_" + kind + ".json"));

  std::ofstream csv(out_dir / ("prediction_sets_" + kind + ".csv"), std::ios::trunc);
  csv << "example_id,true_label,set_size,covered,member_labels\n";
  for (Eigen::Index i = 0; i < data.test.size(); ++i) {
    const auto& set = sets[static_cast<std::size_t>(i)];
    csv << data.test.ids[static_cast<std::size_t>(i)] << ',' << (data.test.y[i] + 1) << ','
        << set.size << ',' << (set.contains(data.test.y[i]) ? 1 : 0) << ',';
    for (std::size_t l = 0; l < set.labels.size(); ++l) {
      if (l > 0) csv << ';';
      csv << set.labels[l] + 1;
    }
    csv << '\n';
  }

  Json metrics;
  metrics["apss"] = apss(sets);
  metrics["coverage"] = marginal_coverage(sets, data.test.y);
  return metrics;
}

int cmd_calibrate_eval(const fs::path& run_dir, const fs::path& data_arg, const fs::path& out_arg,
                       const std::string& score_name, double alpha, bool all_scores,
                       bool dry_run) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must be in (0,1)");
  const fs::path config_path = run_dir / "config.json";
  if (!fs::exists(config_path))
    throw MissingArtifactError("run: no config.json in " + run_dir.string());
  const TrainingConfig config = training_config_from_json(read_json_file(config_path));
  const fs::path checkpoint = checkpoint_path(run_dir, config.epochs);
  if (!fs::exists(checkpoint))
    throw MissingArtifactError("run: missing final checkpoint " + checkpoint.string());
  if (dry_run) {
    log_event({{"event", "dry_run"}, {"command", "calibrate-eval"}});
    return kExitOk;
  }
  Stopwatch watch;
  const ModelParams model = load_checkpoint(checkpoint);
  const SplitDataset data = load_dataset(data_arg);
  const fs::path out_dir = resolve_out(out_arg);
  fs::create_directories(out_dir);

  std::vector<ScoreKind> kinds;
  if (all_scores) {
    kinds = {ScoreKind::kHps, ScoreKind::kAps, ScoreKind::kRaps, ScoreKind::kSaps};
  } else {
    kinds = {score_kind_from_name(score_name)};
  }

  Json metrics;
  metrics["alpha"] = alpha;
  Json blocks;
  for (ScoreKind kind : kinds) {
    ScoreSpec spec = config.score;
    spec.kind = kind;
    if (spec.tie_break == TieBreak::kRandomized)
      spec.u_seed = mix_seed(config.seeds.tie_break, static_cast<std::uint64_t>(kind));
    blocks[score_kind_name(kind)] =
        evaluate_score(model, data, spec, alpha, out_dir, checkpoint.string());
  }
  if (all_scores) {
    metrics["scores"] = blocks;
  } else {
    metrics["score"] = score_kind_name(kinds.front());
    metrics["apss"] = blocks[score_kind_name(kinds.front())]["apss"];
    metrics["coverage"] = blocks[score_kind_name(kinds.front())]["coverage"];
  }
  write_json_file(metrics, out_dir / "metrics.json");
  write_manifest(out_dir, "calibrate-eval", training_config_to_json(config),
                 {{"run_dir", run_dir.string()}, {"data", dataset_file(data_arg).string()}},
                 {{"metrics", (out_dir / "metrics.json").string()}},
                 {{"tie_break", config.seeds.tie_break}}, watch.seconds());
  log_event({{"event", "calibrate_eval_done"}, {"metrics", metrics}});
  return kExitOk;
}

void assert_ledger_rows(const std::vector<LedgerRow>& rows, const std::string& source) {
  for (const auto& row : rows) {
    const bool thm1_asserted =
        row.score_kind == ScoreKind::kHps || row.score_kind == ScoreKind::kAps;
    if (thm1_asserted && row.thm1_margin < 0.0)
      throw TheoremViolation("theorem1 epoch=" + std::to_string(row.epoch) +
                             " margin=" + format_double(row.thm1_margin) + " (" + source + ")");
    if (row.thm2_margin < 0.0)
      throw TheoremViolation("theorem2 epoch=" + std::to_string(row.epoch) +
                             " margin=" + format_double(row.thm2_margin) + " (" + source + ")");
    if (row.assump_lhs < row.assump_rhs)
      throw TheoremViolation("assumption epoch=" + std::to_string(row.epoch) +
                             " margin=" + format_double(row.assump_lhs - row.assump_rhs) + " (" +
                             source + ")");
  }
}

int cmd_verify(const fs::path& run_dir, const fs::path& data_arg, double alpha, bool dry_run) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must be in (0,1)");
  if (!fs::exists(run_dir / "config.json"))
    throw MissingArtifactError("run: no config.json in " + run_dir.string());
  if (dry_run) {
    log_event({{"event", "dry_run"}, {"command", "verify"}});
    return kExitOk;
  }
  Stopwatch watch;
  const TrainingRun run = load_run(run_dir);
  const SplitDataset data = load_dataset(data_arg);

  // Recorded trainer ledger first, then a fresh pass over every checkpoint
  // with all four scores on the test split.
  assert_ledger_rows(run.ledger, "recorded ledger");

  std::vector<LedgerRow> rows;
  for (const auto& cp : run.checkpoints) {
    for (ScoreKind kind : {ScoreKind::kHps, ScoreKind::kAps, ScoreKind::kRaps, ScoreKind::kSaps}) {
      ScoreSpec spec = run.config.score;
      spec.kind = kind;
      if (spec.tie_break == TieBreak::kRandomized)
        spec.u_seed = mix_seed(run.config.seeds.tie_break, static_cast<std::uint64_t>(kind));
      rows.push_back(evaluate_ledger_row(cp.model, data, Split::kTest, spec, alpha, cp.epoch));
    }
  }
  const fs::path out_dir = run_dir / "verify";
  fs::create_directories(out_dir);
  write_ledger_csv(rows, out_dir / "ledger.csv");
  assert_ledger_rows(rows, "recomputed");

  write_manifest(out_dir, "verify", training_config_to_json(run.config),
                 {{"run_dir", run_dir.string()}, {"data", dataset_file(data_arg).string()}},
                 {{"ledger", (out_dir / "ledger.csv").string()}},
                 {{"tie_break", run.config.seeds.tie_break}}, watch.seconds());
  log_event({{"event", "verify_done"}, {"rows", rows.size()}});
  return kExitOk;
}

int cmd_sweep(const fs::path& config_path, const fs::path& data_arg, const fs::path& out_arg,
              bool dry_run) {
  const Json j = read_json_file(config_path);
  const TrainingConfig base = training_config_from_json(require_field(j, "base"));
  std::vector<MethodConfig> methods;
  for (const auto& name : require_field(j, "methods")) {
    MethodConfig method;
    method.name = name.get<std::string>();
    method.config = base;
    method.config.loss = loss_kind_from_name(method.name);
    methods.push_back(std::move(method));
  }
  std::vector<ScoreSpec> scores;
  for (const auto& name : require_field(j, "scores")) {
    ScoreSpec spec = base.score;
    spec.kind = score_kind_from_name(name.get<std::string>());
    scores.push_back(spec);
  }
  const int n_seeds = require_field(j, "n_seeds").get<int>();
  const double alpha = j.value("alpha", base.alpha);
  if (methods.empty() || scores.empty()) throw ConfigError("sweep: methods and scores required");
  if (dry_run) {
    log_event({{"event", "dry_run"}, {"command", "sweep"}});
    return kExitOk;
  }
  Stopwatch watch;
  const SplitDataset data = load_dataset(data_arg);
  const fs::path out_dir = resolve_out(out_arg);
  fs::create_directories(out_dir);

  const ComparisonTable table = compare_methods(methods, data, scores, alpha, n_seeds);
  write_comparison_csv(table, out_dir / "comparison.csv");

  Json report;
  report["alpha"] = alpha;
  report["n_seeds"] = n_seeds;
  // Context only: published full-scale numbers for the same method family.
  // This desk-scale harness does not reproduce them.
  report["full_scale_reference"] = {
      {"note", "full-scale image-benchmark result for context; not reproduced at this scale"},
      {"rows", Json::array({Json{{"dataset", "cifar100"},
                                 {"backbone", "resnet"},
                                 {"score", "hps"},
                                 {"method", "rwce"},
                                 {"apss_mean", 2.68},
                                 {"apss_std", 0.083}}})}};
  Json cells = Json::array();
  bool any_failed = false;
  for (const auto& cell : table.cells) {
    Json c;
    c["method"] = cell.method;
    c["score"] = score_kind_name(cell.score);
    c["status"] = cell.ok ? "ok" : "failed";
    if (cell.ok) {
      Json runs = Json::array();
      for (const auto& run : cell.runs) runs.push_back({{"apss", run.apss}, {"coverage", run.coverage}});
      c["runs"] = runs;
      c["apss_mean"] = cell.agg.apss_mean;
      c["cov_mean"] = cell.agg.cov_mean;
      if (cell.agg.has_std) {
        c["apss_std"] = cell.agg.apss_std;
        c["cov_std"] = cell.agg.cov_std;
      }
      if (cell.has_rel_change) c["rel_change_pct"] = cell.rel_change_pct;
    } else {
      c["error"] = cell.error;
      any_failed = true;
    }
    cells.push_back(std::move(c));
  }
  report["cells"] = cells;
  write_json_file(report, out_dir / "comparison.json");
  write_manifest(out_dir, "sweep", j, {{"config", config_path.string()},
                                       {"data", dataset_file(data_arg).string()}},
                 {{"comparison", (out_dir / "comparison.csv").string()}},
                 {{"init", base.seeds.init},
                  {"shuffle", base.seeds.shuffle},
                  {"tie_break", base.seeds.tie_break}},
                 watch.seconds());
  log_event({{"event", "sweep_done"}, {"cells", table.cells.size()}, {"failed", any_failed}});
  return any_failed ? kExitPartial : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conformal training toolkit: rank-weighted and baseline objectives with "
               "split-conformal calibration"};
  app.require_subcommand(1);

  std::string config_path, data_path, out_path, run_path, score_name = "hps";
  double alpha = 0.1;
  bool dry_run = false, all_scores = false;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic benchmark dataset");
  gen->add_option("--config", config_path, "SyntheticSpec JSON")->required();
  gen->add_option("--out", out_path, "output directory")->required();
  gen->add_flag("--dry-run", dry_run, "validate config and exit");

  auto* train_cmd = app.add_subcommand("train", "train a model per TrainingConfig JSON");
  train_cmd->add_option("--config", config_path, "TrainingConfig JSON")->required();
  train_cmd->add_option("--data", data_path, "dataset CSV or directory")->required();
  train_cmd->add_option("--out", out_path, "run directory")->required();
  train_cmd->add_flag("--dry-run", dry_run, "validate config and exit");

  auto* cal = app.add_subcommand("calibrate-eval", "calibrate the final checkpoint and evaluate");
  cal->add_option("--run", run_path, "run directory")->required();
  cal->add_option("--data", data_path, "dataset CSV or directory")->required();
  cal->add_option("--out", out_path, "output directory")->required();
  cal->add_option("--score", score_name, "score kind (hps|aps|raps|saps)");
  cal->add_option("--alpha", alpha, "miscoverage rate");
  cal->add_flag("--all-scores", all_scores, "evaluate all four scores");
  cal->add_flag("--dry-run", dry_run, "validate inputs and exit");

  auto* verify = app.add_subcommand("verify", "run the theorem monitors over every checkpoint");
  verify->add_option("--run", run_path, "run directory")->required();
  verify->add_option("--data", data_path, "dataset CSV or directory")->required();
  verify->add_option("--alpha", alpha, "miscoverage rate");
  verify->add_flag("--dry-run", dry_run, "validate inputs and exit");

  auto* sweep = app.add_subcommand("sweep", "method-by-score comparison over seeded runs");
  sweep->add_option("--config", config_path, "sweep JSON (base config, methods, scores, n_seeds)")
      ->required();
  sweep->add_option("--data", data_path, "dataset CSV or directory")->required();
  sweep->add_option("--out", out_path, "output directory")->required();
  sweep->add_flag("--dry-run", dry_run, "validate config and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (app.got_subcommand(gen)) return cmd_gen_data(config_path, out_path, dry_run);
    if (app.got_subcommand(train_cmd)) return cmd_train(config_path, data_path, out_path, dry_run);
    if (app.got_subcommand(cal))
      return cmd_calibrate_eval(run_path, data_path, out_path, score_name, alpha, all_scores,
                                dry_run);
    if (app.got_subcommand(verify)) return cmd_verify(run_path, data_path, alpha, dry_run);
    if (app.got_subcommand(sweep)) return cmd_sweep(config_path, data_path, out_path, dry_run);
  } catch (const TheoremViolation& e) {
    log_event({{"event", "error"}, {"kind", "theorem"}, {"message", e.what()}});
    std::cerr << e.what() << '\n';
    return kExitTheorem;
  } catch (const MissingArtifactError& e) {
    log_event({{"event", "error"}, {"kind", "missing"}, {"message", e.what()}});
    std::cerr << e.what() << '\n';
    return kExitMissing;
  } catch (const NumericError& e) {
    log_event({{"event", "error"}, {"kind", "numeric"}, {"step", e.step}, {"message", e.what()}});
    std::cerr << e.what() << '\n';
    return kExitNumeric;
  } catch (const IntegrityError& e) {
    log_event({{"event", "error"}, {"kind", "integrity"}, {"message", e.what()}});
    std::cerr << e.what() << '\n';
    return kExitMissing;
  } catch (const Json::exception& e) {
    log_event({{"event", "error"}, {"kind", "config"}, {"message", e.what()}});
    std::cerr << "config: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    log_event({{"event", "error"}, {"kind", "config"}, {"message", e.what()}});
    std::cerr << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}
