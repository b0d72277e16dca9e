#include "rwce/theory.hpp"

#include <fstream>
#include <sstream>

#include "rwce/losses.hpp"
#include "rwce/trainer.hpp"

namespace rwce {

TheoremOneCheck check_theorem1_from_probs(const ConformalPredictor& predictor,
                                          const Eigen::Ref<const Matrix>& probs,
                                          const IntVector& y) {
  if (probs.rows() == 0) throw ConfigError("theorem1: empty evaluation set");
  const auto sets = predict_sets_from_probs(predictor, probs);
  const IntVector ranks = label_ranks(probs, y);
  TheoremOneCheck check;
  double total_size = 0.0;
  for (const auto& set : sets) total_size += static_cast<double>(set.size);
  check.mean_set_size = total_size / static_cast<double>(sets.size());
  check.mean_rank = ranks.cast<double>().mean();
  const double k = static_cast<double>(probs.cols());
  const double m = static_cast<double>(predictor.calibration_size);
  check.slack = k * (1.0 - predictor.alpha + 1.0 / (m + 1.0));
  check.margin = check.mean_rank + check.slack - check.mean_set_size;
  return check;
}

TheoremOneCheck check_theorem1(const ConformalPredictor& predictor, const ModelParams& model,
                               const Eigen::Ref<const Matrix>& x, const IntVector& y) {
  return check_theorem1_from_probs(predictor, forward_batch(model, x), y);
}

TheoremTwoCheck check_theorem2_from_probs(const Eigen::Ref<const Matrix>& probs,
                                          const IntVector& y) {
  const BatchLossReport report = rwce_loss(probs, y);
  TheoremTwoCheck check;
  check.rank_minus_one = report.mean_rank - 1.0;
  check.rwce = report.loss;
  check.margin = check.rwce - check.rank_minus_one;
  return check;
}

TheoremTwoCheck check_theorem2(const ModelParams& model, const Eigen::Ref<const Matrix>& x,
                               const IntVector& y) {
  return check_theorem2_from_probs(forward_batch(model, x), y);
}

AssumptionCheck check_assumption_from_probs(const Eigen::Ref<const Matrix>& probs,
                                            const IntVector& y) {
  const IntVector ranks = label_ranks(probs, y);
  const Vector ce = cross_entropy_from_probs(probs, y);
  AssumptionCheck check;
  check.lhs = ((ranks.cast<double>().array() - 1.0) * (ce.array() - 1.0)).mean();
  check.rhs = -ce.mean();
  check.holds = check.lhs >= check.rhs;
  return check;
}

AssumptionCheck check_assumption(const ModelParams& model, const Eigen::Ref<const Matrix>& x,
                                 const IntVector& y) {
  return check_assumption_from_probs(forward_batch(model, x), y);
}

LedgerRow evaluate_ledger_row(const ModelParams& model, const SplitDataset& data, Split split,
                              const ScoreSpec& score, double alpha, int epoch) {
  const Partition& part = data.part(split);
  if (part.size() == 0) throw ConfigError("ledger: empty evaluation split " + split_name(split));
  const ConformalPredictor predictor = calibrate(model, score, data.cal.x, data.cal.y, alpha);
  const Matrix probs = forward_batch(model, part.x);
  const TheoremOneCheck t1 = check_theorem1_from_probs(predictor, probs, part.y);
  const TheoremTwoCheck t2 = check_theorem2_from_probs(probs, part.y);
  const AssumptionCheck assump = check_assumption_from_probs(probs, part.y);

  LedgerRow row;
  row.epoch = epoch;
  row.split = split_name(split);
  row.score_kind = score.kind;
  row.alpha = alpha;
  row.e_set_size = t1.mean_set_size;
  row.e_rank = t1.mean_rank;
  row.slack = t1.slack;
  row.thm1_margin = t1.margin;
  row.rank_minus1 = t2.rank_minus_one;
  row.rwce = t2.rwce;
  row.thm2_margin = t2.margin;
  row.assump_lhs = assump.lhs;
  row.assump_rhs = assump.rhs;
  return row;
}

const char* const kLedgerHeader =
    "epoch,split,score_kind,alpha,E_set_size,E_rank,slack,thm1_margin,rank_minus1,rwce,"
    "thm2_margin,assump_lhs,assump_rhs";

std::string ledger_row_csv(const LedgerRow& row) {
  std::ostringstream out;
  out << row.epoch << ',' << row.split << ',' << score_kind_name(row.score_kind) << ','
      << format_double(row.alpha) << ',' << format_double(row.e_set_size) << ','
      << format_double(row.e_rank) << ',' << format_double(row.slack) << ','
      << format_double(row.thm1_margin) << ',' << format_double(row.rank_minus1) << ','
      << format_double(row.rwce) << ',' << format_double(row.thm2_margin) << ','
      << format_double(row.assump_lhs) << ',' << format_double(row.assump_rhs);
  return out.str();
}

void write_ledger_csv(const std::vector<LedgerRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IntegrityError("ledger: cannot open for write: " + path.string());
  out << kLedgerHeader << '\n';
  for (const auto& row : rows) out << ledger_row_csv(row) << '\n';
}

std::vector<LedgerRow> read_ledger_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("ledger: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kLedgerHeader)
    throw IntegrityError("ledger: unexpected header in " + path.string());
  std::vector<LedgerRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    auto next = [&]() {
      if (!std::getline(ss, field, ',')) throw IntegrityError("ledger: truncated row");
      return field;
    };
    try {
      LedgerRow row;
      row.epoch = std::stoi(next());
      row.split = next();
      row.score_kind = score_kind_from_name(next());
      row.alpha = std::stod(next());
      row.e_set_size = std::stod(next());
      row.e_rank = std::stod(next());
      row.slack = std::stod(next());
      row.thm1_margin = std::stod(next());
      row.rank_minus1 = std::stod(next());
      row.rwce = std::stod(next());
      row.thm2_margin = std::stod(next());
      row.assump_lhs = std::stod(next());
      row.assump_rhs = std::stod(next());
      rows.push_back(std::move(row));
    } catch (const std::logic_error&) {
      throw IntegrityError("ledger: malformed row in " + path.string());
    }
  }
  return rows;
}

std::vector<LossApssPoint> track_loss_vs_apss(const TrainingRun& run, const SplitDataset& data,
                                              const ScoreSpec& score, double alpha, Split split) {
  if (run.checkpoints.empty()) throw MissingArtifactError("track: run has no checkpoints");
  const Partition& part = data.part(split);
  if (part.size() == 0) throw ConfigError("track: empty evaluation split");
  std::vector<LossApssPoint> points;
  points.reserve(run.checkpoints.size());
  for (const auto& cp : run.checkpoints) {
    const ConformalPredictor predictor = calibrate(cp.model, score, data.cal.x, data.cal.y, alpha);
    const Matrix probs = forward_batch(cp.model, part.x);
    const auto sets = predict_sets_from_probs(predictor, probs);
    double total = 0.0;
    for (const auto& set : sets) total += static_cast<double>(set.size);
    LossApssPoint point;
    point.epoch = cp.epoch;
    point.rwce_plus_one = rwce_loss(probs, part.y).loss + 1.0;
    point.apss = total / static_cast<double>(sets.size());
    points.push_back(point);
  }
  return points;
}

}  // namespace rwce
