#include "rwce/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include "rwce/random.hpp"

namespace rwce {

long ModelParams::parameter_count() const {
  long n = 0;
  for (const auto& w : weights) n += w.size();
  for (const auto& b : biases) n += b.size();
  return n;
}

bool ModelParams::all_finite() const {
  for (const auto& w : weights)
    if (!w.allFinite()) return false;
  for (const auto& b : biases)
    if (!b.allFinite()) return false;
  return std::isfinite(temperature);
}

GradientPack GradientPack::zeros_like(const ModelParams& model) {
  GradientPack g;
  g.weights.reserve(model.weights.size());
  g.biases.reserve(model.biases.size());
  for (const auto& w : model.weights) g.weights.push_back(Matrix::Zero(w.rows(), w.cols()));
  for (const auto& b : model.biases) g.biases.push_back(Vector::Zero(b.size()));
  return g;
}

bool GradientPack::all_finite() const {
  for (const auto& w : weights)
    if (!w.allFinite()) return false;
  for (const auto& b : biases)
    if (!b.allFinite()) return false;
  return true;
}

double GradientPack::squared_norm() const {
  double s = 0.0;
  for (const auto& w : weights) s += w.squaredNorm();
  for (const auto& b : biases) s += b.squaredNorm();
  return s;
}

namespace {

std::vector<std::pair<int, int>> layer_shapes(const Architecture& arch) {
  std::vector<std::pair<int, int>> shapes;
  int in = arch.input_dim;
  for (int width : arch.hidden) {
    shapes.emplace_back(width, in);
    in = width;
  }
  shapes.emplace_back(arch.num_classes, in);
  return shapes;
}

}  // namespace

ModelParams make_model(const Architecture& arch, double temperature, std::uint64_t init_seed) {
  if (arch.input_dim < 1 || arch.num_classes < 2)
    throw ConfigError("architecture: input_dim >= 1 and num_classes >= 2 required");
  for (int w : arch.hidden)
    if (w < 1) throw ConfigError("architecture: hidden widths must be >= 1");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");

  ModelParams model;
  model.arch = arch;
  model.temperature = temperature;
  auto eng = make_engine(init_seed, Stream::kModelInit);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (auto [out, in] : layer_shapes(arch)) {
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    Matrix w(out, in);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) w(r, c) = bound * unit(eng);
    model.weights.push_back(std::move(w));
    model.biases.push_back(Vector::Zero(out));
  }
  return model;
}

void validate_model(const ModelParams& model) {
  const auto shapes = layer_shapes(model.arch);
  if (model.weights.size() != shapes.size() || model.biases.size() != shapes.size())
    throw ConfigError("model: layer count does not match architecture");
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    if (model.weights[l].rows() != shapes[l].first || model.weights[l].cols() != shapes[l].second)
      throw ConfigError("model: weight shape mismatch at layer " + std::to_string(l));
    if (model.biases[l].size() != shapes[l].first)
      throw ConfigError("model: bias shape mismatch at layer " + std::to_string(l));
  }
  if (!(model.temperature > 0.0)) throw ConfigError("model: temperature must be > 0");
  if (!model.all_finite()) throw ConfigError("model: parameters must be finite");
}

ForwardCache forward_cached(const ModelParams& model, const Eigen::Ref<const Matrix>& x) {
  if (x.cols() != model.arch.input_dim)
    throw ConfigError("forward: expected " + std::to_string(model.arch.input_dim) +
                      " features, got " + std::to_string(x.cols()));
  ForwardCache cache;
  cache.activations.push_back(x);
  const int layers = model.arch.layer_count();
  for (int l = 0; l < layers; ++l) {
    Matrix pre = cache.activations.back() * model.weights[l].transpose();
    pre.rowwise() += model.biases[l].transpose();
    cache.pre_activations.push_back(pre);
    if (l + 1 < layers) {
      cache.activations.push_back(pre.cwiseMax(0.0));
    }
  }
  cache.scaled_logits = cache.pre_activations.back() / model.temperature;

  // Row-wise log-sum-exp with max subtraction.
  const Vector row_max = cache.scaled_logits.rowwise().maxCoeff();
  Matrix shifted = cache.scaled_logits.colwise() - row_max;
  Matrix exps = shifted.array().exp();
  const Vector denom = exps.rowwise().sum();
  cache.probs = exps.array().colwise() / denom.array();
  cache.log_probs = shifted.array().colwise() - denom.array().log();
  return cache;
}

Matrix forward_batch(const ModelParams& model, const Eigen::Ref<const Matrix>& x) {
  return forward_cached(model, x).probs;
}

Vector forward(const ModelParams& model, const Eigen::Ref<const Vector>& x) {
  Matrix row = x.transpose();
  return forward_batch(model, row).row(0).transpose();
}

Vector cross_entropy_from_cache(const ForwardCache& cache, const IntVector& labels) {
  const Eigen::Index n = cache.log_probs.rows();
  if (labels.size() != n) throw ConfigError("cross_entropy: label count mismatch");
  Vector ce(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || y >= cache.log_probs.cols())
      throw ConfigError("cross_entropy: label out of range at example " + std::to_string(i));
    ce[i] = -cache.log_probs(i, y);
  }
  return ce;
}

GradientPack backward_from_logit_grad(const ModelParams& model, const ForwardCache& cache,
                                      const Eigen::Ref<const Matrix>& dlogits) {
  GradientPack grads = GradientPack::zeros_like(model);
  const int layers = model.arch.layer_count();
  Matrix dpre = dlogits;
  for (int l = layers - 1; l >= 0; --l) {
    grads.weights[l] = dpre.transpose() * cache.activations[l];
    grads.biases[l] = dpre.colwise().sum().transpose();
    if (l > 0) {
      Matrix dact = dpre * model.weights[l];
      dpre = dact.array() * (cache.pre_activations[l - 1].array() > 0.0).cast<double>();
    }
  }
  return grads;
}

Matrix logit_grad_from_prob_grad(const ForwardCache& cache, const Eigen::Ref<const Matrix>& dprobs,
                                 double temperature) {
  // dL/dz = (p .* g - p * (g . p)) / T per example, g = dL/dp.
  const Matrix gp = dprobs.array() * cache.probs.array();
  const Vector inner = gp.rowwise().sum();
  Matrix dlogits = gp - (cache.probs.array().colwise() * inner.array()).matrix();
  return dlogits / temperature;
}

GradientPack backward_weighted_ce(const ModelParams& model, const ForwardCache& cache,
                                  const IntVector& labels,
                                  const Eigen::Ref<const Vector>& example_weights) {
  const Eigen::Index n = cache.probs.rows();
  if (labels.size() != n || example_weights.size() != n)
    throw ConfigError("backward: batch size mismatch between probs, labels, and weights");
  Matrix dlogits = cache.probs;
  for (Eigen::Index i = 0; i < n; ++i) dlogits(i, labels[i]) -= 1.0;
  const double scale = 1.0 / (model.temperature * static_cast<double>(n));
  dlogits.array().colwise() *= example_weights.array() * scale;
  return backward_from_logit_grad(model, cache, dlogits);
}

OptimizerState OptimizerState::create(const ModelParams& model, double lr, double momentum,
                                      double weight_decay, std::vector<int> milestones,
                                      double gamma) {
  if (!(lr > 0.0)) throw ConfigError("optimizer: learning rate must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("optimizer: momentum must be in [0,1)");
  if (weight_decay < 0.0) throw ConfigError("optimizer: weight decay must be >= 0");
  if (!(gamma > 0.0)) throw ConfigError("optimizer: gamma must be > 0");
  OptimizerState state;
  state.learning_rate = lr;
  state.momentum = momentum;
  state.weight_decay = weight_decay;
  state.milestones = std::move(milestones);
  state.gamma = gamma;
  state.velocity = GradientPack::zeros_like(model);
  return state;
}

double learning_rate_at(const OptimizerState& state, int epoch) {
  int passed = 0;
  for (int m : state.milestones)
    if (epoch > m) ++passed;
  return state.learning_rate * std::pow(state.gamma, passed);
}

void sgd_step(OptimizerState& state, ModelParams& model, const GradientPack& grads, int epoch) {
  if (grads.weights.size() != model.weights.size())
    throw ConfigError("sgd_step: gradient/parameter layer mismatch");
  const double lr = learning_rate_at(state, epoch);
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    state.velocity.weights[l] = state.momentum * state.velocity.weights[l] + grads.weights[l] +
                                state.weight_decay * model.weights[l];
    state.velocity.biases[l] = state.momentum * state.velocity.biases[l] + grads.biases[l] +
                               state.weight_decay * model.biases[l];
    model.weights[l] -= lr * state.velocity.weights[l];
    model.biases[l] -= lr * state.velocity.biases[l];
  }
}

namespace {

constexpr char kModelMagic[8] = {'R', 'W', 'C', 'E', 'M', 'D', 'L', '1'};
constexpr char kOptMagic[8] = {'R', 'W', 'C', 'E', 'O', 'P', 'T', '1'};

void write_i32(std::ostream& out, std::int32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::int32_t read_i32(std::istream& in) {
  std::int32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

void write_doubles(std::ostream& out, const double* data, std::size_t count) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
}

void read_doubles(std::istream& in, double* data, std::size_t count) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
}

}  // namespace

void save_checkpoint(const ModelParams& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IntegrityError("checkpoint: cannot open for write: " + path.string());
  out.write(kModelMagic, sizeof(kModelMagic));
  write_i32(out, model.arch.input_dim);
  write_i32(out, static_cast<std::int32_t>(model.arch.hidden.size()));
  for (int w : model.arch.hidden) write_i32(out, w);
  write_i32(out, model.arch.num_classes);
  write_doubles(out, &model.temperature, 1);
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    write_doubles(out, model.weights[l].data(), static_cast<std::size_t>(model.weights[l].size()));
    write_doubles(out, model.biases[l].data(), static_cast<std::size_t>(model.biases[l].size()));
  }
  if (!out) throw IntegrityError("checkpoint: short write: " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("checkpoint: cannot open: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0)
    throw IntegrityError("checkpoint: bad magic in " + path.string());
  ModelParams model;
  model.arch.input_dim = read_i32(in);
  const std::int32_t n_hidden = read_i32(in);
  if (!in || n_hidden < 0 || n_hidden > 64) throw IntegrityError("checkpoint: corrupt header");
  model.arch.hidden.resize(n_hidden);
  for (auto& w : model.arch.hidden) w = read_i32(in);
  model.arch.num_classes = read_i32(in);
  read_doubles(in, &model.temperature, 1);
  if (!in) throw IntegrityError("checkpoint: corrupt header");
  for (auto [out_dim, in_dim] : layer_shapes(model.arch)) {
    Matrix w(out_dim, in_dim);
    Vector b(out_dim);
    read_doubles(in, w.data(), static_cast<std::size_t>(w.size()));
    read_doubles(in, b.data(), static_cast<std::size_t>(b.size()));
    if (!in) throw IntegrityError("checkpoint: truncated parameter block");
    model.weights.push_back(std::move(w));
    model.biases.push_back(std::move(b));
  }
  validate_model(model);
  return model;
}

void save_optimizer_state(const OptimizerState& state, int epochs_done,
                          const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IntegrityError("optimizer state: cannot open for write: " + path.string());
  out.write(kOptMagic, sizeof(kOptMagic));
  write_i32(out, epochs_done);
  write_i32(out, static_cast<std::int32_t>(state.velocity.weights.size()));
  for (std::size_t l = 0; l < state.velocity.weights.size(); ++l) {
    write_doubles(out, state.velocity.weights[l].data(),
                  static_cast<std::size_t>(state.velocity.weights[l].size()));
    write_doubles(out, state.velocity.biases[l].data(),
                  static_cast<std::size_t>(state.velocity.biases[l].size()));
  }
  if (!out) throw IntegrityError("optimizer state: short write");
}

int load_optimizer_state(OptimizerState& state, const ModelParams& model,
                         const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("optimizer state: cannot open: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kOptMagic, sizeof(magic)) != 0)
    throw IntegrityError("optimizer state: bad magic in " + path.string());
  const int epochs_done = read_i32(in);
  const std::int32_t layers = read_i32(in);
  if (!in || layers != static_cast<std::int32_t>(model.weights.size()))
    throw IntegrityError("optimizer state: layer count mismatch");
  state.velocity = GradientPack::zeros_like(model);
  for (std::size_t l = 0; l < state.velocity.weights.size(); ++l) {
    read_doubles(in, state.velocity.weights[l].data(),
                 static_cast<std::size_t>(state.velocity.weights[l].size()));
    read_doubles(in, state.velocity.biases[l].data(),
                 static_cast<std::size_t>(state.velocity.biases[l].size()));
    if (!in) throw IntegrityError("optimizer state: truncated velocity block");
  }
  return epochs_done;
}

}  // namespace rwce
