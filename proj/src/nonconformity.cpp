#include "rwce/nonconformity.hpp"

#include <algorithm>
#include <numeric>

#include "rwce/random.hpp"

namespace rwce {

void validate_score_spec(const ScoreSpec& spec) {
  if (spec.kind == ScoreKind::kRaps) {
    if (spec.raps_lambda < 0.0) throw ConfigError("score: raps_lambda must be >= 0");
    if (spec.raps_k_reg < 1) throw ConfigError("score: raps_k_reg must be >= 1");
  }
  if (spec.kind == ScoreKind::kSaps && !(spec.saps_lambda > 0.0))
    throw ConfigError("score: saps_lambda must be > 0");
  if (spec.tie_break == TieBreak::kFixed && (spec.fixed_u < 0.0 || spec.fixed_u > 1.0))
    throw ConfigError("score: fixed_u must be in [0,1]");
}

std::string score_kind_name(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::kHps: return "hps";
    case ScoreKind::kAps: return "aps";
    case ScoreKind::kRaps: return "raps";
    case ScoreKind::kSaps: return "saps";
  }
  return "hps";
}

ScoreKind score_kind_from_name(const std::string& name) {
  if (name == "hps" || name == "HPS") return ScoreKind::kHps;
  if (name == "aps" || name == "APS") return ScoreKind::kAps;
  if (name == "raps" || name == "RAPS") return ScoreKind::kRaps;
  if (name == "saps" || name == "SAPS") return ScoreKind::kSaps;
  throw ConfigError("score: unknown kind '" + name + "'");
}

namespace {

void check_label(const Eigen::Ref<const Vector>& probs, int label) {
  if (label < 0 || label >= probs.size())
    throw ConfigError("score: label " + std::to_string(label) + " out of range for K=" +
                      std::to_string(probs.size()));
}

// Indices sorted by descending probability, ties by ascending index.
std::vector<int> descending_order(const Eigen::Ref<const Vector>& probs) {
  std::vector<int> order(static_cast<std::size_t>(probs.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return probs[a] > probs[b]; });
  return order;
}

}  // namespace

int label_rank(const Eigen::Ref<const Vector>& probs, int label) {
  check_label(probs, label);
  const double py = probs[label];
  int rank = 0;
  for (Eigen::Index l = 0; l < probs.size(); ++l)
    if (probs[l] >= py) ++rank;
  return rank;
}

IntVector label_ranks(const Eigen::Ref<const Matrix>& probs, const IntVector& labels) {
  if (probs.rows() != labels.size()) throw ConfigError("label_ranks: batch size mismatch");
  IntVector ranks(labels.size());
  for (Eigen::Index i = 0; i < labels.size(); ++i)
    ranks[i] = label_rank(probs.row(i).transpose(), labels[i]);
  return ranks;
}

double score_hps(const Eigen::Ref<const Vector>& probs, int label) {
  check_label(probs, label);
  return 1.0 - probs[label];
}

double score_aps(const Eigen::Ref<const Vector>& probs, int label, double u) {
  check_label(probs, label);
  const int r = label_rank(probs, label);
  const auto order = descending_order(probs);
  double prefix = 0.0;
  for (int l = 0; l < r - 1; ++l) prefix += probs[order[l]];
  return prefix + u * probs[order[r - 1]];
}

double score_raps(const Eigen::Ref<const Vector>& probs, int label, double u, double lambda,
                  int k_reg) {
  if (lambda < 0.0) throw ConfigError("score: raps_lambda must be >= 0");
  if (k_reg < 1) throw ConfigError("score: raps_k_reg must be >= 1");
  const int r = label_rank(probs, label);
  return score_aps(probs, label, u) + lambda * std::max(0, r - k_reg);
}

double score_saps(const Eigen::Ref<const Vector>& probs, int label, double u, double lambda) {
  if (!(lambda > 0.0)) throw ConfigError("score: saps_lambda must be > 0");
  check_label(probs, label);
  const int r = label_rank(probs, label);
  const double top = probs.maxCoeff();
  if (r == 1) return u * top;
  return top + lambda * (static_cast<double>(r) - 2.0 + u);
}

double score_label(const ScoreSpec& spec, const Eigen::Ref<const Vector>& probs, int label,
                   double u) {
  switch (spec.kind) {
    case ScoreKind::kHps: return score_hps(probs, label);
    case ScoreKind::kAps: return score_aps(probs, label, u);
    case ScoreKind::kRaps: return score_raps(probs, label, u, spec.raps_lambda, spec.raps_k_reg);
    case ScoreKind::kSaps: return score_saps(probs, label, u, spec.saps_lambda);
  }
  throw ConfigError("score: unknown kind");
}

Vector score_all_labels(const ScoreSpec& spec, const Eigen::Ref<const Vector>& probs, double u) {
  const Eigen::Index k = probs.size();
  Vector scores(k);
  if (spec.kind == ScoreKind::kHps) {
    scores = 1.0 - probs.array();
    return scores;
  }
  // One sort shared across labels; ranks read off the sorted array so the
  // prefix sums stay consistent under exact probability ties.
  const auto order = descending_order(probs);
  Vector prefix(k + 1);
  prefix[0] = 0.0;
  for (Eigen::Index pos = 0; pos < k; ++pos) prefix[pos + 1] = prefix[pos] + probs[order[pos]];
  std::vector<int> rank_of(static_cast<std::size_t>(k));
  for (Eigen::Index pos = 0; pos < k; ++pos) {
    const int lbl = order[pos];
    int r = static_cast<int>(pos) + 1;
    // Extend over a tied block: rank counts every probability >= p_y.
    while (r < k && probs[order[r]] == probs[lbl]) ++r;
    rank_of[lbl] = r;
  }
  const double top = probs[order[0]];
  for (int lbl = 0; lbl < k; ++lbl) {
    const int r = rank_of[lbl];
    double s = prefix[r - 1] + u * probs[order[r - 1]];
    switch (spec.kind) {
      case ScoreKind::kAps: break;
      case ScoreKind::kRaps: s += spec.raps_lambda * std::max(0, r - spec.raps_k_reg); break;
      case ScoreKind::kSaps:
        s = (r == 1) ? u * top : top + spec.saps_lambda * (static_cast<double>(r) - 2.0 + u);
        break;
      case ScoreKind::kHps: break;
    }
    scores[lbl] = s;
  }
  return scores;
}

double tie_break_u(const ScoreSpec& spec, Stream stream, std::uint64_t example_index) {
  if (spec.tie_break == TieBreak::kFixed) return spec.fixed_u;
  return uniform_unit(spec.u_seed, stream, example_index);
}

}  // namespace rwce
