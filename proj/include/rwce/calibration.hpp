#pragma once

#include <cstdint>
#include <vector>

#include "rwce/common.hpp"
#include "rwce/data.hpp"
#include "rwce/model.hpp"
#include "rwce/nonconformity.hpp"

namespace rwce {

// Split-conformal calibration: the threshold is the
// ceil((1-alpha)(m+1))-th smallest calibration score, or +inf when that
// index exceeds m (every prediction set is then the full label set).

struct ConformalPredictor {
  ScoreSpec score;
  double alpha = 0.1;
  double q_hat = 0.0;  // +inf sentinel allowed
  int calibration_size = 0;
};

struct PredictionSet {
  std::vector<int> labels;  // ascending, 0-based
  int size = 0;

  bool contains(int label) const;
};

ConformalPredictor calibrate(const ModelParams& model, const ScoreSpec& score,
                             const Eigen::Ref<const Matrix>& cal_x, const IntVector& cal_y,
                             double alpha);

// Membership rule: y in set iff S(x, y) <= q_hat, with one shared tie-break
// draw per example. The batch form derives the draw from the prediction
// stream by example position.
PredictionSet predict_set(const ConformalPredictor& predictor, const ModelParams& model,
                          const Eigen::Ref<const Vector>& x, double u);
std::vector<PredictionSet> predict_sets(const ConformalPredictor& predictor,
                                        const ModelParams& model,
                                        const Eigen::Ref<const Matrix>& x);

// Prediction sets straight from a probability matrix (model already applied).
std::vector<PredictionSet> predict_sets_from_probs(const ConformalPredictor& predictor,
                                                   const Eigen::Ref<const Matrix>& probs);

// Repeated random cal/test resplits of the dataset pool; returns the marginal
// coverage measured on each test half.
std::vector<double> coverage_trial(const ModelParams& model, const ScoreSpec& score,
                                   const SplitDataset& data, double alpha, int n_splits,
                                   std::uint64_t seed);

}  // namespace rwce
