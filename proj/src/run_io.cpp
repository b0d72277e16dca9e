#include "rwce/run_io.hpp"

#include <cstdio>

#include "rwce/serialize.hpp"

namespace rwce {

namespace fs = std::filesystem;

fs::path checkpoint_path(const fs::path& run_dir, int epoch) {
  char name[32];
  std::snprintf(name, sizeof(name), "epoch_%04d.model", epoch);
  return run_dir / "checkpoints" / name;
}

namespace {

void persist_run(const TrainingRun& run, const fs::path& run_dir) {
  fs::create_directories(run_dir / "checkpoints");
  write_json_file(training_config_to_json(run.config), run_dir / "config.json");
  for (const auto& cp : run.checkpoints) save_checkpoint(cp.model, checkpoint_path(run_dir, cp.epoch));
  save_optimizer_state(run.final_optimizer, run.epochs_done, run_dir / "checkpoints" / "last.optstate");
  write_trace_csv(run.trace, run_dir / "trace.csv");
  write_ledger_csv(run.ledger, run_dir / "ledger.csv");
}

}  // namespace

TrainingRun train_to_dir(const TrainingConfig& config, const SplitDataset& data,
                         const fs::path& run_dir, const StepObserver& observer) {
  TrainingRun run = train(config, data, observer);
  persist_run(run, run_dir);
  return run;
}

TrainingRun load_run(const fs::path& run_dir) {
  const fs::path config_path = run_dir / "config.json";
  if (!fs::exists(config_path))
    throw MissingArtifactError("run: no config.json in " + run_dir.string());
  TrainingRun run;
  run.config = training_config_from_json(read_json_file(config_path));

  if (!fs::exists(run_dir / "checkpoints"))
    throw MissingArtifactError("run: no checkpoints directory in " + run_dir.string());
  for (int epoch = 0; epoch <= run.config.epochs; ++epoch) {
    const fs::path path = checkpoint_path(run_dir, epoch);
    if (fs::exists(path)) run.checkpoints.push_back({epoch, load_checkpoint(path)});
  }
  if (run.checkpoints.empty())
    throw MissingArtifactError("run: no checkpoints in " + run_dir.string());

  run.final_model = run.checkpoints.back().model;
  run.final_optimizer = OptimizerState::create(
      run.final_model, run.config.optimizer.learning_rate, run.config.optimizer.momentum,
      run.config.optimizer.weight_decay, run.config.optimizer.milestones,
      run.config.optimizer.gamma);
  run.epochs_done =
      load_optimizer_state(run.final_optimizer, run.final_model, run_dir / "checkpoints" / "last.optstate");
  if (run.epochs_done != run.checkpoints.back().epoch)
    throw IntegrityError("run: optimizer state epoch does not match the last checkpoint");
  if (fs::exists(run_dir / "trace.csv")) run.trace = read_trace_csv(run_dir / "trace.csv");
  if (fs::exists(run_dir / "ledger.csv")) run.ledger = read_ledger_csv(run_dir / "ledger.csv");
  return run;
}

TrainingRun resume(const fs::path& run_dir, int extra_epochs, const SplitDataset& data,
                   const StepObserver& observer) {
  if (extra_epochs < 0) throw ConfigError("resume: extra_epochs must be >= 0");
  TrainingRun run = load_run(run_dir);

  Architecture expected;
  expected.input_dim = data.feature_dim;
  expected.hidden = run.config.hidden;
  expected.num_classes = data.num_classes;
  if (!(run.final_model.arch == expected))
    throw IntegrityError("resume: checkpoint architecture does not match config/data");

  if (extra_epochs == 0) return run;
  run.config.epochs += extra_epochs;
  train_more(run, data, observer);
  persist_run(run, run_dir);
  return run;
}

}  // namespace rwce
