#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rwce/calibration.hpp"
#include "rwce/trainer.hpp"

namespace rwce {

// APSS and marginal coverage, plus the multi-seed comparison harness.

double apss(const std::vector<PredictionSet>& sets);
double marginal_coverage(const std::vector<PredictionSet>& sets, const IntVector& labels);

struct RunMetrics {
  double apss = 0.0;
  double coverage = 0.0;
};

struct AggregateMetrics {
  int runs = 0;
  double apss_mean = 0.0;
  double apss_std = 0.0;  // sample std (n-1); valid only when has_std
  double cov_mean = 0.0;
  double cov_std = 0.0;
  bool has_std = false;
};

AggregateMetrics aggregate_runs(const std::vector<RunMetrics>& runs);

struct MethodConfig {
  std::string name;
  TrainingConfig config;
};

struct ComparisonCell {
  std::string method;
  LossKind loss = LossKind::kCrossEntropy;
  ScoreKind score = ScoreKind::kHps;
  std::vector<RunMetrics> runs;  // indexed by seed
  AggregateMetrics agg;
  bool ok = true;
  std::string error;
  bool has_rel_change = false;
  double rel_change_pct = 0.0;  // vs the best (min-APSS) non-rank-weighted method
};

struct ComparisonTable {
  std::vector<ComparisonCell> cells;
  int n_seeds = 0;
  double alpha = 0.1;
};

// Trains each method n_seeds times (seed i offsets every run seed by i),
// then calibrates and evaluates the shared final models under every score.
// A crashing cell is marked failed; the others still complete.
ComparisonTable compare_methods(const std::vector<MethodConfig>& methods,
                                const SplitDataset& data, const std::vector<ScoreSpec>& scores,
                                double alpha, int n_seeds);

void write_comparison_csv(const ComparisonTable& table, const std::filesystem::path& path);

}  // namespace rwce
