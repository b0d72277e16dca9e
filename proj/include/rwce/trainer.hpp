#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "rwce/common.hpp"
#include "rwce/data.hpp"
#include "rwce/losses.hpp"
#include "rwce/model.hpp"
#include "rwce/theory.hpp"

namespace rwce {

// Training loop: epoch-wise shuffle without replacement, per-batch rank and
// loss computation, SGD update, per-epoch trace/ledger hooks. Ranks and
// thresholds are recomputed from the live model every step and never carry
// gradients.

struct OptimizerHyper {
  double learning_rate = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::vector<int> milestones;
  double gamma = 0.1;
};

struct TrainingSeeds {
  std::uint64_t init = 1;
  std::uint64_t shuffle = 2;
  std::uint64_t tie_break = 3;
};

struct TrainingConfig {
  LossKind loss = LossKind::kCrossEntropy;
  ScoreSpec score;  // used by conformal losses and the per-epoch ledger
  int batch_size = 128;
  int epochs = 1;
  OptimizerHyper optimizer;
  double alpha = 0.1;
  TrainingSeeds seeds;
  int checkpoint_every = 1;  // 0 keeps only the final checkpoint
  int ledger_every = 1;      // 0 disables the per-epoch theorem ledger
  Split ledger_split = Split::kTrain;
  std::vector<int> hidden = {64};
  double temperature = 1.0;
  SmoothIndicatorSpec smooth;
  int cut_grid = 101;
  bool select_best_epoch = false;  // off by default; the final model is the output
};

void validate_training_config(const TrainingConfig& config);

struct TraceRow {
  int epoch = 0;
  double loss = 0.0;
  double mean_rank = 0.0;
  double mean_ce = 0.0;
};

struct StepEvent {
  int epoch = 0;
  long step_in_epoch = 0;
  long global_step = 0;
  double loss = 0.0;
  std::vector<std::int64_t> example_ids;
};

using StepObserver = std::function<void(const StepEvent&)>;

struct Checkpoint {
  int epoch = 0;
  ModelParams model;
};

struct TrainingRun {
  TrainingConfig config;
  std::vector<Checkpoint> checkpoints;  // epoch 0 (init) through the final epoch
  std::vector<TraceRow> trace;          // one row per trained epoch
  std::vector<LedgerRow> ledger;
  ModelParams final_model;
  OptimizerState final_optimizer;
  int epochs_done = 0;

  const ModelParams& checkpoint_at(int epoch) const;
};

// One loss-and-gradient evaluation of the configured objective on a batch.
// `us` supplies the per-example tie-break draws for conformal losses. Ranks,
// thresholds, and quantile selections are treated as constants; gradients
// flow only through the differentiable probability terms.
struct LossEvaluation {
  double loss = 0.0;
  double mean_rank = 0.0;
  double mean_ce = 0.0;
  GradientPack grads;
};

LossEvaluation evaluate_loss(const TrainingConfig& config, const ModelParams& model,
                             const ForwardCache& cache, const IntVector& labels,
                             const Eigen::Ref<const Vector>& us);

// Full run from a fresh seeded initialization.
TrainingRun train(const TrainingConfig& config, const SplitDataset& data,
                  const StepObserver& observer = nullptr);

// Continues a run in place from `run.epochs_done` up to config.epochs.
void train_more(TrainingRun& run, const SplitDataset& data, const StepObserver& observer = nullptr);

// FNV-1a over the batch example ids; quoted in numeric-abort errors.
std::uint64_t batch_hash(const std::vector<std::int64_t>& ids);

extern const char* const kTraceHeader;
std::string trace_row_csv(const TraceRow& row);
void write_trace_csv(const std::vector<TraceRow>& rows, const std::filesystem::path& path);
std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path);

}  // namespace rwce
