#include "rwce/serialize.hpp"

#include <fstream>
#include <limits>

namespace rwce {

const Json& require_field(const Json& j, const std::string& key) {
  if (!j.contains(key)) throw ConfigError("config: missing field " + key);
  return j.at(key);
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("config: cannot open " + path.string());
  Json j;
  try {
    in >> j;
  } catch (const Json::parse_error& e) {
    throw ConfigError("config: invalid JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

void write_json_file(const Json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IntegrityError("config: cannot open for write: " + path.string());
  out << j.dump(2) << '\n';
}

Json score_spec_to_json(const ScoreSpec& spec) {
  Json j;
  j["kind"] = score_kind_name(spec.kind);
  j["raps_lambda"] = spec.raps_lambda;
  j["raps_k_reg"] = spec.raps_k_reg;
  j["saps_lambda"] = spec.saps_lambda;
  j["tie_break"] = spec.tie_break == TieBreak::kRandomized ? "randomized" : "fixed";
  j["fixed_u"] = spec.fixed_u;
  j["u_seed"] = spec.u_seed;
  return j;
}

ScoreSpec score_spec_from_json(const Json& j) {
  ScoreSpec spec;
  spec.kind = score_kind_from_name(require_field(j, "kind").get<std::string>());
  spec.raps_lambda = j.value("raps_lambda", spec.raps_lambda);
  spec.raps_k_reg = j.value("raps_k_reg", spec.raps_k_reg);
  spec.saps_lambda = j.value("saps_lambda", spec.saps_lambda);
  const std::string tb = j.value("tie_break", std::string("randomized"));
  if (tb == "randomized") {
    spec.tie_break = TieBreak::kRandomized;
  } else if (tb == "fixed") {
    spec.tie_break = TieBreak::kFixed;
  } else {
    throw ConfigError("config: tie_break must be 'randomized' or 'fixed'");
  }
  spec.fixed_u = j.value("fixed_u", spec.fixed_u);
  spec.u_seed = j.value("u_seed", spec.u_seed);
  validate_score_spec(spec);
  return spec;
}

Json smooth_spec_to_json(const SmoothIndicatorSpec& spec) {
  Json j;
  j["kind"] = spec.kind == SmoothIndicatorSpec::Kind::kSigmoid ? "sigmoid" : "gauss-erf";
  j["tau"] = spec.tau;
  j["sigma"] = spec.sigma;
  return j;
}

SmoothIndicatorSpec smooth_spec_from_json(const Json& j) {
  SmoothIndicatorSpec spec;
  const std::string kind = j.value("kind", std::string("sigmoid"));
  if (kind == "sigmoid") {
    spec.kind = SmoothIndicatorSpec::Kind::kSigmoid;
  } else if (kind == "gauss-erf" || kind == "erf") {
    spec.kind = SmoothIndicatorSpec::Kind::kGaussErf;
  } else {
    throw ConfigError("config: smooth indicator kind must be 'sigmoid' or 'gauss-erf'");
  }
  spec.tau = j.value("tau", spec.tau);
  spec.sigma = j.value("sigma", spec.sigma);
  validate_smooth_spec(spec);
  return spec;
}

Json training_config_to_json(const TrainingConfig& config) {
  Json j;
  j["loss"] = loss_kind_name(config.loss);
  j["score"] = score_spec_to_json(config.score);
  j["batch_size"] = config.batch_size;
  j["epochs"] = config.epochs;
  j["alpha"] = config.alpha;
  j["optimizer"] = {{"learning_rate", config.optimizer.learning_rate},
                    {"momentum", config.optimizer.momentum},
                    {"weight_decay", config.optimizer.weight_decay},
                    {"milestones", config.optimizer.milestones},
                    {"gamma", config.optimizer.gamma}};
  j["seeds"] = {{"init", config.seeds.init},
                {"shuffle", config.seeds.shuffle},
                {"tie_break", config.seeds.tie_break}};
  j["checkpoint_every"] = config.checkpoint_every;
  j["ledger_every"] = config.ledger_every;
  j["ledger_split"] = split_name(config.ledger_split);
  j["architecture"] = {{"hidden", config.hidden}};
  j["temperature"] = config.temperature;
  j["smooth"] = smooth_spec_to_json(config.smooth);
  j["cut_grid"] = config.cut_grid;
  j["select_best_epoch"] = config.select_best_epoch;
  return j;
}

TrainingConfig training_config_from_json(const Json& j) {
  TrainingConfig config;
  config.loss = loss_kind_from_name(require_field(j, "loss").get<std::string>());
  if (j.contains("score")) config.score = score_spec_from_json(j.at("score"));
  config.batch_size = require_field(j, "batch_size").get<int>();
  config.epochs = require_field(j, "epochs").get<int>();
  config.alpha = require_field(j, "alpha").get<double>();

  const Json& opt = require_field(j, "optimizer");
  config.optimizer.learning_rate = require_field(opt, "learning_rate").get<double>();
  config.optimizer.momentum = opt.value("momentum", config.optimizer.momentum);
  config.optimizer.weight_decay = opt.value("weight_decay", config.optimizer.weight_decay);
  config.optimizer.milestones = opt.value("milestones", config.optimizer.milestones);
  config.optimizer.gamma = opt.value("gamma", config.optimizer.gamma);

  const Json& seeds = require_field(j, "seeds");
  config.seeds.init = require_field(seeds, "init").get<std::uint64_t>();
  config.seeds.shuffle = require_field(seeds, "shuffle").get<std::uint64_t>();
  config.seeds.tie_break = require_field(seeds, "tie_break").get<std::uint64_t>();

  config.checkpoint_every = j.value("checkpoint_every", config.checkpoint_every);
  config.ledger_every = j.value("ledger_every", config.ledger_every);
  if (j.contains("ledger_split"))
    config.ledger_split = split_from_name(j.at("ledger_split").get<std::string>());
  if (j.contains("architecture"))
    config.hidden = j.at("architecture").value("hidden", config.hidden);
  config.temperature = j.value("temperature", config.temperature);
  if (j.contains("smooth")) config.smooth = smooth_spec_from_json(j.at("smooth"));
  config.cut_grid = j.value("cut_grid", config.cut_grid);
  config.select_best_epoch = j.value("select_best_epoch", config.select_best_epoch);
  validate_training_config(config);
  return config;
}

Json synthetic_spec_to_json(const SyntheticSpec& spec) {
  Json j;
  j["num_classes"] = spec.num_classes;
  j["feature_dim"] = spec.feature_dim;
  j["clusters_per_class"] = spec.clusters_per_class;
  j["separation"] = spec.separation;
  j["noise_scale"] = spec.noise_scale;
  j["counts"] = {{"train", spec.n_train}, {"val", spec.n_val}, {"cal", spec.n_cal},
                 {"test", spec.n_test}};
  j["seed"] = spec.seed;
  return j;
}

SyntheticSpec synthetic_spec_from_json(const Json& j) {
  SyntheticSpec spec;
  spec.num_classes = require_field(j, "num_classes").get<int>();
  spec.feature_dim = require_field(j, "feature_dim").get<int>();
  spec.clusters_per_class = j.value("clusters_per_class", spec.clusters_per_class);
  spec.separation = require_field(j, "separation").get<double>();
  spec.noise_scale = j.value("noise_scale", spec.noise_scale);
  const Json& counts = require_field(j, "counts");
  spec.n_train = require_field(counts, "train").get<long>();
  spec.n_val = require_field(counts, "val").get<long>();
  spec.n_cal = require_field(counts, "cal").get<long>();
  spec.n_test = require_field(counts, "test").get<long>();
  spec.seed = require_field(j, "seed").get<std::uint64_t>();
  validate_synthetic_spec(spec);
  return spec;
}

Json predictor_to_json(const ConformalPredictor& predictor, const std::string& checkpoint_path) {
  Json j;
  j["score"] = score_spec_to_json(predictor.score);
  j["alpha"] = predictor.alpha;
  if (std::isfinite(predictor.q_hat)) {
    j["q_hat"] = predictor.q_hat;
  } else {
    j["q_hat"] = "inf";
  }
  j["calibration_size"] = predictor.calibration_size;
  j["model_checkpoint"] = checkpoint_path;
  j["seed"] = predictor.score.u_seed;
  return j;
}

ConformalPredictor predictor_from_json(const Json& j, std::string* checkpoint_path) {
  ConformalPredictor predictor;
  predictor.score = score_spec_from_json(require_field(j, "score"));
  predictor.alpha = require_field(j, "alpha").get<double>();
  const Json& q = require_field(j, "q_hat");
  predictor.q_hat =
      q.is_string() ? std::numeric_limits<double>::infinity() : q.get<double>();
  predictor.calibration_size = require_field(j, "calibration_size").get<int>();
  if (checkpoint_path != nullptr)
    *checkpoint_path = j.value("model_checkpoint", std::string());
  return predictor;
}

}  // namespace rwce
