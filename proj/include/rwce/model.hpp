#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "rwce/common.hpp"

namespace rwce {

// Fully-connected ReLU network with a temperature-scaled softmax head.
// Layers are stored as (out x in) weight matrices plus bias vectors; the
// forward pass maps a feature vector onto the probability simplex.

struct Architecture {
  int input_dim = 0;
  std::vector<int> hidden;
  int num_classes = 0;

  int layer_count() const { return static_cast<int>(hidden.size()) + 1; }
  bool operator==(const Architecture&) const = default;
};

struct ModelParams {
  Architecture arch;
  double temperature = 1.0;  // divides logits before softmax; must stay > 0
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  long parameter_count() const;
  bool all_finite() const;
};

// Same shape as the parameters; used for gradients and optimizer velocity.
struct GradientPack {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static GradientPack zeros_like(const ModelParams& model);
  bool all_finite() const;
  double squared_norm() const;
};

// Glorot-uniform initialization from the model-init stream.
ModelParams make_model(const Architecture& arch, double temperature, std::uint64_t init_seed);

// Checks dimensions, temperature positivity, and finiteness; throws ConfigError.
void validate_model(const ModelParams& model);

// Softmax probabilities for one input / a batch (rows are examples).
Vector forward(const ModelParams& model, const Eigen::Ref<const Vector>& x);
Matrix forward_batch(const ModelParams& model, const Eigen::Ref<const Matrix>& x);

// Intermediate state of a batched forward pass, kept for backprop.
struct ForwardCache {
  std::vector<Matrix> activations;  // activations[0] is the input batch
  std::vector<Matrix> pre_activations;
  Matrix scaled_logits;  // logits / T
  Matrix probs;
  Matrix log_probs;
};

ForwardCache forward_cached(const ModelParams& model, const Eigen::Ref<const Matrix>& x);

// Per-example cross-entropy -log softmax(logits/T)[y], taken from the cache.
Vector cross_entropy_from_cache(const ForwardCache& cache, const IntVector& labels);

// Gradient of (1/s) * sum_i w_i * ce_i with the weights treated as constants.
GradientPack backward_weighted_ce(const ModelParams& model, const ForwardCache& cache,
                                  const IntVector& labels,
                                  const Eigen::Ref<const Vector>& example_weights);

// Backprop an arbitrary dLoss/dlogits through the network (logits here are
// the raw, pre-temperature outputs of the last layer).
GradientPack backward_from_logit_grad(const ModelParams& model, const ForwardCache& cache,
                                      const Eigen::Ref<const Matrix>& dlogits);

// Convert dLoss/dprobs to dLoss/dlogits through the temperature-scaled softmax.
Matrix logit_grad_from_prob_grad(const ForwardCache& cache, const Eigen::Ref<const Matrix>& dprobs,
                                 double temperature);

struct OptimizerState {
  double learning_rate = 0.1;
  double momentum = 0.0;       // in [0, 1)
  double weight_decay = 0.0;   // >= 0
  std::vector<int> milestones; // 1-based epochs; rate decays after passing each
  double gamma = 0.1;
  GradientPack velocity;

  static OptimizerState create(const ModelParams& model, double lr, double momentum,
                               double weight_decay, std::vector<int> milestones, double gamma);
};

double learning_rate_at(const OptimizerState& state, int epoch);

// velocity <- momentum*velocity + grad + weight_decay*param
// param    <- param - lr(epoch)*velocity
void sgd_step(OptimizerState& state, ModelParams& model, const GradientPack& grads, int epoch);

// Versioned binary checkpoint; round-trips bit-exactly.
void save_checkpoint(const ModelParams& model, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

void save_optimizer_state(const OptimizerState& state, int epochs_done,
                          const std::filesystem::path& path);
// Restores velocity buffers into `state` (hyperparameters come from config).
int load_optimizer_state(OptimizerState& state, const ModelParams& model,
                         const std::filesystem::path& path);

}  // namespace rwce
