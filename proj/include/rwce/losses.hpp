#pragma once

#include <string>

#include "rwce/common.hpp"
#include "rwce/nonconformity.hpp"

namespace rwce {

enum class LossKind { kCrossEntropy, kRankWeighted, kConfTr, kCut };

std::string loss_kind_name(LossKind kind);
LossKind loss_kind_from_name(const std::string& name);

// Smoothed step function used by the ConfTr surrogate. Both kinds evaluate
// to 0.5 at s == q and decrease monotonically in the score.
struct SmoothIndicatorSpec {
  enum class Kind { kSigmoid, kGaussErf };
  Kind kind = Kind::kSigmoid;
  double tau = 0.1;    // sigmoid temperature, > 0
  double sigma = 0.1;  // erf smoothness, > 0
};

void validate_smooth_spec(const SmoothIndicatorSpec& spec);
double smooth_indicator(const SmoothIndicatorSpec& spec, double score, double threshold);

// Per-example cross-entropy from explicit probabilities (floored at 1e-12).
Vector cross_entropy_from_probs(const Eigen::Ref<const Matrix>& probs, const IntVector& labels);

struct BatchLossReport {
  double loss = 0.0;
  IntVector ranks;
  Vector ce;
  double mean_rank = 0.0;
  double mean_ce = 0.0;
};

// Plain mean cross-entropy, reported with ranks for the trace.
BatchLossReport ce_loss(const Eigen::Ref<const Matrix>& probs, const IntVector& labels);

// Rank-weighted cross-entropy: (1/s) * sum_i rank_i * ce_i. Ranks are
// recomputed from the probabilities and act as constant weights.
BatchLossReport rwce_loss(const Eigen::Ref<const Matrix>& probs, const IntVector& labels);

// ConfTr surrogate. The batch splits 50/50: the first half calibrates a hard
// quantile threshold (held constant for gradients), the second half is scored
// by the smoothed set-size sum. `us` carries one tie-break draw per example.
double conftr_threshold(const Eigen::Ref<const Matrix>& probs, const IntVector& labels,
                        const ScoreSpec& score, double alpha, const Eigen::Ref<const Vector>& us,
                        int* cal_count = nullptr);
double conftr_loss_at_threshold(const Eigen::Ref<const Matrix>& pred_probs, const ScoreSpec& score,
                                const SmoothIndicatorSpec& smooth, double threshold,
                                const Eigen::Ref<const Vector>& pred_us);
double conftr_loss(const Eigen::Ref<const Matrix>& probs, const IntVector& labels,
                   const ScoreSpec& score, const SmoothIndicatorSpec& smooth, double alpha,
                   const Eigen::Ref<const Vector>& us);

// CUT uniformity deviation: max over an alpha grid of
// |(1-alpha) - q(alpha)| where q(alpha) is the ceil((1-alpha)*s)-th smallest
// true-label score (0 when the index is 0). Scores are assumed in [0,1].
struct CutDetail {
  double loss = 0.0;
  int grid_index = -1;      // first grid point attaining the max
  int example_index = -1;   // batch example supplying the selected order statistic
  double signed_dev = 0.0;  // (1-alpha*) - selected score
};

CutDetail cut_loss_detail(const Eigen::Ref<const Matrix>& probs, const IntVector& labels,
                          const ScoreSpec& score, int grid_size,
                          const Eigen::Ref<const Vector>& us);
double cut_loss(const Eigen::Ref<const Matrix>& probs, const IntVector& labels,
                const ScoreSpec& score, int grid_size, const Eigen::Ref<const Vector>& us);

// d(score)/d(probs) for one example and one candidate label, holding the
// sort order and ranks fixed. Used by the ConfTr and CUT gradient paths.
Vector score_prob_gradient(const ScoreSpec& spec, const Eigen::Ref<const Vector>& probs, int label,
                           double u);

}  // namespace rwce
