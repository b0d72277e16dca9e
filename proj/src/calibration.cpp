#include "rwce/calibration.hpp"

#include <algorithm>

#include "rwce/quantile.hpp"

namespace rwce {

bool PredictionSet::contains(int label) const {
  return std::binary_search(labels.begin(), labels.end(), label);
}

ConformalPredictor calibrate(const ModelParams& model, const ScoreSpec& score,
                             const Eigen::Ref<const Matrix>& cal_x, const IntVector& cal_y,
                             double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("calibrate: alpha must be in (0,1)");
  if (cal_x.rows() == 0) throw ConfigError("calibrate: empty calibration set");
  if (cal_x.rows() != cal_y.size()) throw ConfigError("calibrate: feature/label count mismatch");
  validate_score_spec(score);

  const Matrix probs = forward_batch(model, cal_x);
  std::vector<double> scores(static_cast<std::size_t>(cal_x.rows()));
  for (Eigen::Index i = 0; i < cal_x.rows(); ++i) {
    const double u = tie_break_u(score, Stream::kCalibrationU, static_cast<std::uint64_t>(i));
    scores[static_cast<std::size_t>(i)] = score_label(score, probs.row(i).transpose(), cal_y[i], u);
  }

  ConformalPredictor predictor;
  predictor.score = score;
  predictor.alpha = alpha;
  predictor.calibration_size = static_cast<int>(cal_x.rows());
  predictor.q_hat = conformal_threshold(std::move(scores), alpha);
  return predictor;
}

namespace {

PredictionSet set_from_scores(const Vector& scores, double q_hat) {
  PredictionSet set;
  for (Eigen::Index y = 0; y < scores.size(); ++y)
    if (scores[y] <= q_hat) set.labels.push_back(static_cast<int>(y));
  set.size = static_cast<int>(set.labels.size());
  return set;
}

}  // namespace

PredictionSet predict_set(const ConformalPredictor& predictor, const ModelParams& model,
                          const Eigen::Ref<const Vector>& x, double u) {
  const Vector probs = forward(model, x);
  return set_from_scores(score_all_labels(predictor.score, probs, u), predictor.q_hat);
}

std::vector<PredictionSet> predict_sets(const ConformalPredictor& predictor,
                                        const ModelParams& model,
                                        const Eigen::Ref<const Matrix>& x) {
  return predict_sets_from_probs(predictor, forward_batch(model, x));
}

std::vector<PredictionSet> predict_sets_from_probs(const ConformalPredictor& predictor,
                                                   const Eigen::Ref<const Matrix>& probs) {
  std::vector<PredictionSet> sets;
  sets.reserve(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const double u =
        tie_break_u(predictor.score, Stream::kPredictionU, static_cast<std::uint64_t>(i));
    sets.push_back(
        set_from_scores(score_all_labels(predictor.score, probs.row(i).transpose(), u),
                        predictor.q_hat));
  }
  return sets;
}

std::vector<double> coverage_trial(const ModelParams& model, const ScoreSpec& score,
                                   const SplitDataset& data, double alpha, int n_splits,
                                   std::uint64_t seed) {
  if (n_splits < 1) throw ConfigError("coverage_trial: n_splits must be >= 1");
  const long pool = data.cal.size() + data.test.size();
  if (data.cal.size() < 1 || data.test.size() < 1)
    throw ConfigError("coverage_trial: dataset needs nonempty cal and test partitions");
  const double cal_fraction = static_cast<double>(data.cal.size()) / static_cast<double>(pool);
  const double test_fraction = static_cast<double>(data.test.size()) / static_cast<double>(pool);

  std::vector<double> coverages;
  coverages.reserve(static_cast<std::size_t>(n_splits));
  for (int t = 0; t < n_splits; ++t) {
    const SplitDataset shuffled =
        resplit(data, cal_fraction, test_fraction, mix_seed(seed, static_cast<std::uint64_t>(t),
                                                            static_cast<std::uint64_t>(Stream::kCoverageTrial)));
    ScoreSpec trial_score = score;
    if (trial_score.tie_break == TieBreak::kRandomized)
      trial_score.u_seed = mix_seed(score.u_seed, static_cast<std::uint64_t>(t) + 1);
    const ConformalPredictor predictor =
        calibrate(model, trial_score, shuffled.cal.x, shuffled.cal.y, alpha);
    const auto sets = predict_sets(predictor, model, shuffled.test.x);
    long covered = 0;
    for (Eigen::Index i = 0; i < shuffled.test.size(); ++i)
      if (sets[static_cast<std::size_t>(i)].contains(shuffled.test.y[i])) ++covered;
    coverages.push_back(static_cast<double>(covered) / static_cast<double>(shuffled.test.size()));
  }
  return coverages;
}

}  // namespace rwce
