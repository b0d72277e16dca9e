#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rwce {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;

inline constexpr const char* kToolVersion = "0.1.0";

// Invalid or inconsistent configuration / input shape.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite value encountered where the pipeline must abort.
struct NumericError : std::runtime_error {
  NumericError(const std::string& msg, long step_index, std::uint64_t batch_hash)
      : std::runtime_error(msg), step(step_index), batch(batch_hash) {}
  long step = -1;
  std::uint64_t batch = 0;
};

// Corrupt or mismatched on-disk artifact.
struct IntegrityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A required file (checkpoint, dataset, run dir) is absent.
struct MissingArtifactError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Fixed-width `%.17g` rendering; round-trips doubles exactly, so CSV
// emission is byte-stable across reruns.
std::string format_double(double v);

// True when every entry of `p` is >= 0 and the entries sum to 1 within tol.
bool is_probability_vector(const Eigen::Ref<const Vector>& p, double tol = 1e-9);

}  // namespace rwce
