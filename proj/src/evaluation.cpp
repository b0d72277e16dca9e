#include "rwce/evaluation.hpp"

#include <cmath>
#include <fstream>

#include "rwce/random.hpp"

namespace rwce {

double apss(const std::vector<PredictionSet>& sets) {
  if (sets.empty()) throw ConfigError("apss: empty prediction-set list");
  double total = 0.0;
  for (const auto& set : sets) total += static_cast<double>(set.size);
  return total / static_cast<double>(sets.size());
}

double marginal_coverage(const std::vector<PredictionSet>& sets, const IntVector& labels) {
  if (static_cast<Eigen::Index>(sets.size()) != labels.size())
    throw ConfigError("coverage: set/label count mismatch");
  if (sets.empty()) throw ConfigError("coverage: empty prediction-set list");
  long covered = 0;
  for (std::size_t i = 0; i < sets.size(); ++i)
    if (sets[i].contains(labels[static_cast<Eigen::Index>(i)])) ++covered;
  return static_cast<double>(covered) / static_cast<double>(sets.size());
}

AggregateMetrics aggregate_runs(const std::vector<RunMetrics>& runs) {
  if (runs.empty()) throw ConfigError("aggregate: needs at least one run");
  AggregateMetrics agg;
  agg.runs = static_cast<int>(runs.size());
  for (const auto& run : runs) {
    agg.apss_mean += run.apss;
    agg.cov_mean += run.coverage;
  }
  agg.apss_mean /= agg.runs;
  agg.cov_mean /= agg.runs;
  if (agg.runs >= 2) {
    double apss_ss = 0.0;
    double cov_ss = 0.0;
    for (const auto& run : runs) {
      apss_ss += (run.apss - agg.apss_mean) * (run.apss - agg.apss_mean);
      cov_ss += (run.coverage - agg.cov_mean) * (run.coverage - agg.cov_mean);
    }
    agg.apss_std = std::sqrt(apss_ss / (agg.runs - 1));
    agg.cov_std = std::sqrt(cov_ss / (agg.runs - 1));
    agg.has_std = true;
  }
  return agg;
}

ComparisonTable compare_methods(const std::vector<MethodConfig>& methods,
                                const SplitDataset& data, const std::vector<ScoreSpec>& scores,
                                double alpha, int n_seeds) {
  if (methods.empty() || scores.empty()) throw ConfigError("compare: methods and scores required");
  if (n_seeds < 1) throw ConfigError("compare: n_seeds must be >= 1");

  ComparisonTable table;
  table.n_seeds = n_seeds;
  table.alpha = alpha;

  for (const auto& method : methods) {
    // One trained model per seed, shared by every score column.
    std::vector<ModelParams> models;
    std::string train_error;
    for (int s = 0; s < n_seeds && train_error.empty(); ++s) {
      TrainingConfig config = method.config;
      config.seeds.init += static_cast<std::uint64_t>(s);
      config.seeds.shuffle += static_cast<std::uint64_t>(s);
      config.seeds.tie_break += static_cast<std::uint64_t>(s);
      config.checkpoint_every = 0;
      config.ledger_every = 0;
      try {
        models.push_back(train(config, data).final_model);
      } catch (const std::exception& e) {
        train_error = e.what();
      }
    }

    for (const auto& score : scores) {
      ComparisonCell cell;
      cell.method = method.name;
      cell.loss = method.config.loss;
      cell.score = score.kind;
      if (!train_error.empty()) {
        cell.ok = false;
        cell.error = train_error;
        table.cells.push_back(std::move(cell));
        continue;
      }
      try {
        for (int s = 0; s < n_seeds; ++s) {
          ScoreSpec eval_score = score;
          if (eval_score.tie_break == TieBreak::kRandomized)
            eval_score.u_seed = mix_seed(method.config.seeds.tie_break,
                                         static_cast<std::uint64_t>(s),
                                         static_cast<std::uint64_t>(score.kind));
          const ConformalPredictor predictor =
              calibrate(models[static_cast<std::size_t>(s)], eval_score, data.cal.x, data.cal.y,
                        alpha);
          const auto sets =
              predict_sets(predictor, models[static_cast<std::size_t>(s)], data.test.x);
          cell.runs.push_back({apss(sets), marginal_coverage(sets, data.test.y)});
        }
        cell.agg = aggregate_runs(cell.runs);
      } catch (const std::exception& e) {
        cell.ok = false;
        cell.error = e.what();
      }
      table.cells.push_back(std::move(cell));
    }
  }

  // Relative APSS change for rank-weighted cells against the best (smallest
  // mean APSS) baseline under the same score.
  for (auto& cell : table.cells) {
    if (!cell.ok || cell.loss != LossKind::kRankWeighted) continue;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& other : table.cells)
      if (other.ok && other.loss != LossKind::kRankWeighted && other.score == cell.score)
        best = std::min(best, other.agg.apss_mean);
    if (std::isfinite(best) && best > 0.0) {
      cell.has_rel_change = true;
      cell.rel_change_pct = 100.0 * (cell.agg.apss_mean - best) / best;
    }
  }
  return table;
}

void write_comparison_csv(const ComparisonTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IntegrityError("comparison: cannot open for write: " + path.string());
  out << "method,score,seed,apss,coverage,apss_mean,apss_std,cov_mean,cov_std,rel_change_pct,"
         "status\n";
  for (const auto& cell : table.cells) {
    for (std::size_t s = 0; s < cell.runs.size(); ++s) {
      out << cell.method << ',' << score_kind_name(cell.score) << ',' << s << ','
          << format_double(cell.runs[s].apss) << ',' << format_double(cell.runs[s].coverage)
          << ",,,,,,ok\n";
    }
    out << cell.method << ',' << score_kind_name(cell.score) << ",agg,,,"
        << (cell.ok ? format_double(cell.agg.apss_mean) : std::string()) << ','
        << (cell.ok && cell.agg.has_std ? format_double(cell.agg.apss_std) : std::string()) << ','
        << (cell.ok ? format_double(cell.agg.cov_mean) : std::string()) << ','
        << (cell.ok && cell.agg.has_std ? format_double(cell.agg.cov_std) : std::string()) << ','
        << (cell.has_rel_change ? format_double(cell.rel_change_pct) : std::string()) << ','
        << (cell.ok ? "ok" : "failed") << '\n';
  }
}

}  // namespace rwce
