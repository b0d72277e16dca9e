#pragma once

#include <filesystem>

#include "rwce/trainer.hpp"

namespace rwce {

// Run directory layout:
//   config.json
//   checkpoints/epoch_%04d.model   (epoch 0 = initialization)
//   checkpoints/last.optstate
//   trace.csv
//   ledger.csv

std::filesystem::path checkpoint_path(const std::filesystem::path& run_dir, int epoch);

// Trains per config and persists the whole run.
TrainingRun train_to_dir(const TrainingConfig& config, const SplitDataset& data,
                         const std::filesystem::path& run_dir,
                         const StepObserver& observer = nullptr);

// Loads config, every checkpointed epoch, trace, and ledger.
TrainingRun load_run(const std::filesystem::path& run_dir);

// Continues a persisted run for extra_epochs with restored optimizer state;
// trace and checkpoints append seamlessly. extra_epochs == 0 is a no-op load.
TrainingRun resume(const std::filesystem::path& run_dir, int extra_epochs,
                   const SplitDataset& data, const StepObserver& observer = nullptr);

}  // namespace rwce
