#include "rwce/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <fstream>
#include <numeric>
#include <sstream>

#include "rwce/quantile.hpp"
#include "rwce/random.hpp"

namespace rwce {

void validate_training_config(const TrainingConfig& config) {
  if (config.epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (config.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (config.loss == LossKind::kConfTr && config.batch_size < 2)
    throw ConfigError("train: conftr needs batch_size >= 2 to split the batch");
  if (!(config.alpha > 0.0 && config.alpha < 1.0)) throw ConfigError("train: alpha must be in (0,1)");
  if (!(config.temperature > 0.0)) throw ConfigError("train: temperature must be > 0");
  if (config.cut_grid < 2) throw ConfigError("train: cut_grid must be >= 2");
  if (config.checkpoint_every < 0 || config.ledger_every < 0)
    throw ConfigError("train: cadences must be >= 0");
  validate_score_spec(config.score);
  validate_smooth_spec(config.smooth);
  OptimizerHyper const& opt = config.optimizer;
  if (!(opt.learning_rate > 0.0)) throw ConfigError("train: learning rate must be > 0");
  if (opt.momentum < 0.0 || opt.momentum >= 1.0) throw ConfigError("train: momentum must be in [0,1)");
  if (opt.weight_decay < 0.0) throw ConfigError("train: weight decay must be >= 0");
  if (!(opt.gamma > 0.0)) throw ConfigError("train: gamma must be > 0");
}

std::uint64_t batch_hash(const std::vector<std::int64_t>& ids) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::int64_t id : ids) {
    auto v = static_cast<std::uint64_t>(id);
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffULL;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

const ModelParams& TrainingRun::checkpoint_at(int epoch) const {
  for (const auto& cp : checkpoints)
    if (cp.epoch == epoch) return cp.model;
  throw MissingArtifactError("run: no checkpoint for epoch " + std::to_string(epoch));
}

namespace {

Vector tie_break_vector(const TrainingConfig& config, int epoch, long step, Eigen::Index n) {
  Vector us(n);
  if (config.score.tie_break == TieBreak::kFixed) {
    us.setConstant(config.score.fixed_u);
  } else {
    for (Eigen::Index i = 0; i < n; ++i)
      us[i] = uniform_unit(config.seeds.tie_break, Stream::kTieBreakTrain,
                           static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(step),
                           static_cast<std::uint64_t>(i));
  }
  return us;
}

double smooth_indicator_slope(const SmoothIndicatorSpec& spec, double score, double threshold) {
  // d/dscore of the smoothed indicator; always <= 0.
  if (spec.kind == SmoothIndicatorSpec::Kind::kSigmoid) {
    const double v = smooth_indicator(spec, score, threshold);
    return -v * (1.0 - v) / spec.tau;
  }
  const double z = (threshold - score) / (std::numbers::sqrt2 * spec.sigma);
  return -std::exp(-z * z) / (spec.sigma * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace

LossEvaluation evaluate_loss(const TrainingConfig& config, const ModelParams& model,
                             const ForwardCache& cache, const IntVector& labels,
                             const Eigen::Ref<const Vector>& us) {
  const Eigen::Index n = labels.size();
  LossEvaluation out;
  const IntVector ranks = label_ranks(cache.probs, labels);
  const Vector ce = cross_entropy_from_cache(cache, labels);
  out.mean_rank = ranks.cast<double>().mean();
  out.mean_ce = ce.mean();

  switch (config.loss) {
    case LossKind::kCrossEntropy: {
      out.loss = out.mean_ce;
      out.grads = backward_weighted_ce(model, cache, labels, Vector::Ones(n));
      break;
    }
    case LossKind::kRankWeighted: {
      const Vector weights = ranks.cast<double>();
      out.loss = (weights.array() * ce.array()).mean();
      out.grads = backward_weighted_ce(model, cache, labels, weights);
      break;
    }
    case LossKind::kConfTr: {
      int h = 0;
      const double q_hat =
          conftr_threshold(cache.probs, labels, config.score, config.alpha, us, &h);
      const Eigen::Index n_pred = n - h;
      out.loss = conftr_loss_at_threshold(cache.probs.bottomRows(n_pred), config.score,
                                          config.smooth, q_hat, us.tail(n_pred));
      Matrix dprobs = Matrix::Zero(n, cache.probs.cols());
      const double inv_pred = 1.0 / static_cast<double>(n_pred);
      for (Eigen::Index i = h; i < n; ++i) {
        const Vector row = cache.probs.row(i).transpose();
        const Vector scores = score_all_labels(config.score, row, us[i]);
        for (Eigen::Index c = 0; c < scores.size(); ++c) {
          const double slope =
              smooth_indicator_slope(config.smooth, scores[c], q_hat) * inv_pred;
          if (slope != 0.0)
            dprobs.row(i) +=
                slope * score_prob_gradient(config.score, row, static_cast<int>(c), us[i]).transpose();
        }
      }
      const Matrix dlogits = logit_grad_from_prob_grad(cache, dprobs, model.temperature);
      out.grads = backward_from_logit_grad(model, cache, dlogits);
      break;
    }
    case LossKind::kCut: {
      const CutDetail detail =
          cut_loss_detail(cache.probs, labels, config.score, config.cut_grid, us);
      out.loss = detail.loss;
      Matrix dprobs = Matrix::Zero(n, cache.probs.cols());
      if (detail.example_index >= 0 && detail.signed_dev != 0.0) {
        const int i = detail.example_index;
        const double sign = detail.signed_dev > 0.0 ? 1.0 : -1.0;
        dprobs.row(i) = -sign * score_prob_gradient(config.score, cache.probs.row(i).transpose(),
                                                    labels[i], us[i])
                                    .transpose();
      }
      const Matrix dlogits = logit_grad_from_prob_grad(cache, dprobs, model.temperature);
      out.grads = backward_from_logit_grad(model, cache, dlogits);
      break;
    }
  }
  return out;
}

namespace {

double validation_loss(const TrainingConfig& config, const ModelParams& model,
                       const Partition& val, int epoch) {
  const ForwardCache cache = forward_cached(model, val.x);
  // Batch-level evaluation of the configured loss; tie-break draws come from
  // a dedicated step id so they stay stable per epoch.
  const Vector us = tie_break_vector(config, epoch, -1, val.y.size());
  return evaluate_loss(config, model, cache, val.y, us).loss;
}

}  // namespace

void train_more(TrainingRun& run, const SplitDataset& data, const StepObserver& observer) {
  const TrainingConfig& config = run.config;
  validate_training_config(config);
  if (data.train.size() == 0) throw ConfigError("train: empty train split");
  if (config.ledger_every > 0 && data.cal.size() == 0)
    throw ConfigError("train: ledger hooks need a nonempty cal split");
  if (config.select_best_epoch && data.val.size() == 0)
    throw ConfigError("train: best-epoch selection needs a nonempty val split");

  ModelParams model = run.final_model;
  OptimizerState opt = run.final_optimizer;
  const long n_train = data.train.size();
  long global_step = static_cast<long>(run.epochs_done) *
                     ((n_train + config.batch_size - 1) / config.batch_size);

  ModelParams best_model;
  bool have_best = false;
  double best_val = std::numeric_limits<double>::infinity();

  for (int epoch = run.epochs_done + 1; epoch <= config.epochs; ++epoch) {
    std::vector<long> order(static_cast<std::size_t>(n_train));
    std::iota(order.begin(), order.end(), 0);
    auto eng = make_engine(config.seeds.shuffle, Stream::kBatchShuffle,
                           static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), eng);

    double loss_sum = 0.0;
    double rank_sum = 0.0;
    double ce_sum = 0.0;
    long seen = 0;
    long step = 0;
    for (long begin = 0; begin < n_train; begin += config.batch_size, ++step) {
      const long count = std::min<long>(config.batch_size, n_train - begin);
      Matrix batch_x(count, data.feature_dim);
      IntVector batch_y(count);
      std::vector<std::int64_t> ids(static_cast<std::size_t>(count));
      for (long i = 0; i < count; ++i) {
        const long row = order[static_cast<std::size_t>(begin + i)];
        batch_x.row(i) = data.train.x.row(row);
        batch_y[i] = data.train.y[row];
        ids[static_cast<std::size_t>(i)] = data.train.ids[static_cast<std::size_t>(row)];
      }

      const ForwardCache cache = forward_cached(model, batch_x);
      const Vector us = tie_break_vector(config, epoch, step, count);
      const LossEvaluation out = evaluate_loss(config, model, cache, batch_y, us);
      if (!std::isfinite(out.loss) || !out.grads.all_finite())
        throw NumericError("train: non-finite loss at step " + std::to_string(global_step) +
                               " (batch hash " + std::to_string(batch_hash(ids)) + ")",
                           global_step, batch_hash(ids));
      sgd_step(opt, model, out.grads, epoch);
      if (!model.all_finite())
        throw NumericError("train: non-finite parameters after step " +
                               std::to_string(global_step) + " (batch hash " +
                               std::to_string(batch_hash(ids)) + ")",
                           global_step, batch_hash(ids));

      loss_sum += out.loss * static_cast<double>(count);
      rank_sum += out.mean_rank * static_cast<double>(count);
      ce_sum += out.mean_ce * static_cast<double>(count);
      seen += count;
      ++global_step;
      if (observer) {
        StepEvent event;
        event.epoch = epoch;
        event.step_in_epoch = step;
        event.global_step = global_step - 1;
        event.loss = out.loss;
        event.example_ids = ids;
        observer(event);
      }
    }

    TraceRow row;
    row.epoch = epoch;
    row.loss = loss_sum / static_cast<double>(seen);
    row.mean_rank = rank_sum / static_cast<double>(seen);
    row.mean_ce = ce_sum / static_cast<double>(seen);
    run.trace.push_back(row);

    if (config.ledger_every > 0 && (epoch % config.ledger_every == 0 || epoch == config.epochs))
      run.ledger.push_back(evaluate_ledger_row(model, data, config.ledger_split, config.score,
                                               config.alpha, epoch));

    const bool keep = epoch == config.epochs ||
                      (config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0);
    if (keep) run.checkpoints.push_back({epoch, model});

    if (config.select_best_epoch) {
      const double val = validation_loss(config, model, data.val, epoch);
      if (val < best_val) {
        best_val = val;
        best_model = model;
        have_best = true;
      }
    }
    run.epochs_done = epoch;
  }

  run.final_optimizer = opt;
  if (config.select_best_epoch && have_best) {
    run.final_model = std::move(best_model);
  } else {
    run.final_model = std::move(model);
  }
}

TrainingRun train(const TrainingConfig& config, const SplitDataset& data,
                  const StepObserver& observer) {
  validate_training_config(config);
  if (data.num_classes < 2) throw ConfigError("train: dataset needs at least 2 classes");

  TrainingConfig normalized = config;
  if (normalized.score.tie_break == TieBreak::kRandomized)
    normalized.score.u_seed = config.seeds.tie_break;

  Architecture arch;
  arch.input_dim = data.feature_dim;
  arch.hidden = normalized.hidden;
  arch.num_classes = data.num_classes;

  TrainingRun run;
  run.config = normalized;
  run.final_model = make_model(arch, normalized.temperature, normalized.seeds.init);
  run.final_optimizer = OptimizerState::create(
      run.final_model, normalized.optimizer.learning_rate, normalized.optimizer.momentum,
      normalized.optimizer.weight_decay, normalized.optimizer.milestones,
      normalized.optimizer.gamma);
  run.checkpoints.push_back({0, run.final_model});
  run.epochs_done = 0;
  train_more(run, data, observer);
  return run;
}

const char* const kTraceHeader = "epoch,loss,mean_rank,mean_ce";

std::string trace_row_csv(const TraceRow& row) {
  std::ostringstream out;
  out << row.epoch << ',' << format_double(row.loss) << ',' << format_double(row.mean_rank) << ','
      << format_double(row.mean_ce);
  return out.str();
}

void write_trace_csv(const std::vector<TraceRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IntegrityError("trace: cannot open for write: " + path.string());
  out << kTraceHeader << '\n';
  for (const auto& row : rows) out << trace_row_csv(row) << '\n';
}

std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("trace: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader)
    throw IntegrityError("trace: unexpected header in " + path.string());
  std::vector<TraceRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    auto next = [&]() {
      if (!std::getline(ss, field, ',')) throw IntegrityError("trace: truncated row");
      return field;
    };
    try {
      TraceRow row;
      row.epoch = std::stoi(next());
      row.loss = std::stod(next());
      row.mean_rank = std::stod(next());
      row.mean_ce = std::stod(next());
      rows.push_back(row);
    } catch (const std::logic_error&) {
      throw IntegrityError("trace: malformed row in " + path.string());
    }
  }
  return rows;
}

}  // namespace rwce
