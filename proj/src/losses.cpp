#include "rwce/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "rwce/quantile.hpp"

namespace rwce {

std::string loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::kCrossEntropy: return "ce";
    case LossKind::kRankWeighted: return "rwce";
    case LossKind::kConfTr: return "conftr";
    case LossKind::kCut: return "cut";
  }
  return "ce";
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "ce") return LossKind::kCrossEntropy;
  if (name == "rwce") return LossKind::kRankWeighted;
  if (name == "conftr") return LossKind::kConfTr;
  if (name == "cut") return LossKind::kCut;
  throw ConfigError("loss: unknown kind '" + name + "'");
}

void validate_smooth_spec(const SmoothIndicatorSpec& spec) {
  if (spec.kind == SmoothIndicatorSpec::Kind::kSigmoid && !(spec.tau > 0.0))
    throw ConfigError("smooth indicator: tau must be > 0");
  if (spec.kind == SmoothIndicatorSpec::Kind::kGaussErf && !(spec.sigma > 0.0))
    throw ConfigError("smooth indicator: sigma must be > 0");
}

double smooth_indicator(const SmoothIndicatorSpec& spec, double score, double threshold) {
  if (spec.kind == SmoothIndicatorSpec::Kind::kSigmoid) {
    const double z = (threshold - score) / spec.tau;
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
  }
  return 0.5 * (1.0 + std::erf((threshold - score) / (std::numbers::sqrt2 * spec.sigma)));
}

Vector cross_entropy_from_probs(const Eigen::Ref<const Matrix>& probs, const IntVector& labels) {
  if (probs.rows() != labels.size()) throw ConfigError("cross_entropy: batch size mismatch");
  Vector ce(labels.size());
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || y >= probs.cols())
      throw ConfigError("cross_entropy: label out of range at example " + std::to_string(i));
    ce[i] = -std::log(std::max(probs(i, y), 1e-12));
  }
  return ce;
}

namespace {

BatchLossReport weighted_report(const Eigen::Ref<const Matrix>& probs, const IntVector& labels,
                                bool rank_weighted) {
  if (probs.rows() == 0) throw ConfigError("loss: empty batch");
  BatchLossReport report;
  report.ranks = label_ranks(probs, labels);
  report.ce = cross_entropy_from_probs(probs, labels);
  report.mean_rank = report.ranks.cast<double>().mean();
  report.mean_ce = report.ce.mean();
  if (rank_weighted) {
    report.loss = (report.ranks.cast<double>().array() * report.ce.array()).mean();
  } else {
    report.loss = report.mean_ce;
  }
  if (!std::isfinite(report.loss)) throw ConfigError("loss: non-finite value");
  return report;
}

}  // namespace

BatchLossReport ce_loss(const Eigen::Ref<const Matrix>& probs, const IntVector& labels) {
  return weighted_report(probs, labels, /*rank_weighted=*/false);
}

BatchLossReport rwce_loss(const Eigen::Ref<const Matrix>& probs, const IntVector& labels) {
  return weighted_report(probs, labels, /*rank_weighted=*/true);
}

double conftr_threshold(const Eigen::Ref<const Matrix>& probs, const IntVector& labels,
                        const ScoreSpec& score, double alpha, const Eigen::Ref<const Vector>& us,
                        int* cal_count) {
  if (probs.rows() < 2) throw ConfigError("conftr: batch must have at least 2 examples to split");
  if (us.size() != probs.rows()) throw ConfigError("conftr: tie-break draw count mismatch");
  const int h = static_cast<int>(probs.rows()) / 2;
  if (cal_count != nullptr) *cal_count = h;
  std::vector<double> cal_scores(static_cast<std::size_t>(h));
  for (int i = 0; i < h; ++i)
    cal_scores[static_cast<std::size_t>(i)] =
        score_label(score, probs.row(i).transpose(), labels[i], us[i]);
  return conformal_threshold(std::move(cal_scores), alpha);
}

double conftr_loss_at_threshold(const Eigen::Ref<const Matrix>& pred_probs, const ScoreSpec& score,
                                const SmoothIndicatorSpec& smooth, double threshold,
                                const Eigen::Ref<const Vector>& pred_us) {
  validate_smooth_spec(smooth);
  if (pred_probs.rows() == 0) throw ConfigError("conftr: empty prediction half");
  double total = 0.0;
  for (Eigen::Index i = 0; i < pred_probs.rows(); ++i) {
    const Vector scores = score_all_labels(score, pred_probs.row(i).transpose(), pred_us[i]);
    for (Eigen::Index y = 0; y < scores.size(); ++y)
      total += smooth_indicator(smooth, scores[y], threshold);
  }
  return total / static_cast<double>(pred_probs.rows());
}

double conftr_loss(const Eigen::Ref<const Matrix>& probs, const IntVector& labels,
                   const ScoreSpec& score, const SmoothIndicatorSpec& smooth, double alpha,
                   const Eigen::Ref<const Vector>& us) {
  int h = 0;
  const double q_hat = conftr_threshold(probs, labels, score, alpha, us, &h);
  const Eigen::Index n_pred = probs.rows() - h;
  return conftr_loss_at_threshold(probs.bottomRows(n_pred), score, smooth, q_hat,
                                  us.tail(n_pred));
}

CutDetail cut_loss_detail(const Eigen::Ref<const Matrix>& probs, const IntVector& labels,
                          const ScoreSpec& score, int grid_size,
                          const Eigen::Ref<const Vector>& us) {
  const Eigen::Index n = probs.rows();
  if (n == 0) throw ConfigError("cut: empty batch");
  if (grid_size < 2) throw ConfigError("cut: alpha grid must have at least 2 points");
  if (us.size() != n) throw ConfigError("cut: tie-break draw count mismatch");

  std::vector<std::pair<double, int>> scored(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    scored[static_cast<std::size_t>(i)] = {
        score_label(score, probs.row(i).transpose(), labels[i], us[i]), static_cast<int>(i)};
  std::sort(scored.begin(), scored.end());

  CutDetail detail;
  for (int g = 0; g < grid_size; ++g) {
    const double alpha = static_cast<double>(g) / static_cast<double>(grid_size - 1);
    const int k = guarded_ceil((1.0 - alpha) * static_cast<double>(n));
    const double q = (k <= 0) ? 0.0 : scored[static_cast<std::size_t>(std::min<int>(k, n) - 1)].first;
    const double dev = (1.0 - alpha) - q;
    if (std::abs(dev) > detail.loss) {
      detail.loss = std::abs(dev);
      detail.grid_index = g;
      detail.example_index = (k <= 0) ? -1 : scored[static_cast<std::size_t>(std::min<int>(k, n) - 1)].second;
      detail.signed_dev = dev;
    }
  }
  return detail;
}

double cut_loss(const Eigen::Ref<const Matrix>& probs, const IntVector& labels,
                const ScoreSpec& score, int grid_size, const Eigen::Ref<const Vector>& us) {
  return cut_loss_detail(probs, labels, score, grid_size, us).loss;
}

Vector score_prob_gradient(const ScoreSpec& spec, const Eigen::Ref<const Vector>& probs, int label,
                           double u) {
  const Eigen::Index k = probs.size();
  Vector grad = Vector::Zero(k);
  switch (spec.kind) {
    case ScoreKind::kHps:
      grad[label] = -1.0;
      break;
    case ScoreKind::kAps:
    case ScoreKind::kRaps: {
      // S = sum_{l: p_l > p_y} p_l + u * p_y with the rank penalty constant.
      const double py = probs[label];
      for (Eigen::Index l = 0; l < k; ++l)
        if (probs[l] > py) grad[l] = 1.0;
      grad[label] += u;
      break;
    }
    case ScoreKind::kSaps: {
      Eigen::Index top = 0;
      probs.maxCoeff(&top);
      grad[top] = (label_rank(probs, label) == 1) ? u : 1.0;
      break;
    }
  }
  return grad;
}

}  // namespace rwce
