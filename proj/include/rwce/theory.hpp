#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rwce/calibration.hpp"
#include "rwce/common.hpp"
#include "rwce/data.hpp"
#include "rwce/model.hpp"

namespace rwce {

// Runnable inequality monitors. Each check returns both sides plus the margin
// (bound minus quantity); nonnegativity is asserted by callers, not here.

// mean |set| <= mean rank + K*(1 - alpha + 1/(m+1)).
// The proof covers HPS, APS, and their variants; for other scores the margin
// is observational.
struct TheoremOneCheck {
  double mean_set_size = 0.0;
  double mean_rank = 0.0;
  double slack = 0.0;
  double margin = 0.0;  // rhs - lhs
};

TheoremOneCheck check_theorem1(const ConformalPredictor& predictor, const ModelParams& model,
                               const Eigen::Ref<const Matrix>& x, const IntVector& y);
TheoremOneCheck check_theorem1_from_probs(const ConformalPredictor& predictor,
                                          const Eigen::Ref<const Matrix>& probs,
                                          const IntVector& y);

// mean(rank) - 1 <= mean(rank * ce); holds unconditionally for cross-entropy.
struct TheoremTwoCheck {
  double rank_minus_one = 0.0;
  double rwce = 0.0;
  double margin = 0.0;
};

TheoremTwoCheck check_theorem2(const ModelParams& model, const Eigen::Ref<const Matrix>& x,
                               const IntVector& y);
TheoremTwoCheck check_theorem2_from_probs(const Eigen::Ref<const Matrix>& probs,
                                          const IntVector& y);

// mean((rank-1)(ce-1)) >= -mean(ce), the alignment hypothesis of the
// rank-weighting bound.
struct AssumptionCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

AssumptionCheck check_assumption(const ModelParams& model, const Eigen::Ref<const Matrix>& x,
                                 const IntVector& y);
AssumptionCheck check_assumption_from_probs(const Eigen::Ref<const Matrix>& probs,
                                            const IntVector& y);

struct LedgerRow {
  int epoch = 0;
  std::string split;
  ScoreKind score_kind = ScoreKind::kHps;
  double alpha = 0.1;
  double e_set_size = 0.0;
  double e_rank = 0.0;
  double slack = 0.0;
  double thm1_margin = 0.0;
  double rank_minus1 = 0.0;
  double rwce = 0.0;
  double thm2_margin = 0.0;
  double assump_lhs = 0.0;
  double assump_rhs = 0.0;
};

// One full monitoring pass: calibrate on the cal split, evaluate on `split`.
LedgerRow evaluate_ledger_row(const ModelParams& model, const SplitDataset& data, Split split,
                              const ScoreSpec& score, double alpha, int epoch);

extern const char* const kLedgerHeader;
std::string ledger_row_csv(const LedgerRow& row);
void write_ledger_csv(const std::vector<LedgerRow>& rows, const std::filesystem::path& path);
std::vector<LedgerRow> read_ledger_csv(const std::filesystem::path& path);

struct TrainingRun;

// Per-checkpoint pairing of (rwce + 1) with the prediction-set size average,
// both measured on `split` after recalibrating on the cal partition.
struct LossApssPoint {
  int epoch = 0;
  double rwce_plus_one = 0.0;
  double apss = 0.0;
};

std::vector<LossApssPoint> track_loss_vs_apss(const TrainingRun& run, const SplitDataset& data,
                                              const ScoreSpec& score, double alpha, Split split);

}  // namespace rwce
