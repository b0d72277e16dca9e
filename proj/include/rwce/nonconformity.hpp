#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rwce/common.hpp"
#include "rwce/random.hpp"

namespace rwce {

// The four nonconformity scores. Labels are 0-based throughout the library;
// ranks are 1-based as defined by rank(p, y) = #{l : p_l >= p_y}.

enum class ScoreKind { kHps, kAps, kRaps, kSaps };

enum class TieBreak { kRandomized, kFixed };

struct ScoreSpec {
  ScoreKind kind = ScoreKind::kHps;
  double raps_lambda = 0.01;  // >= 0
  int raps_k_reg = 5;         // >= 1
  double saps_lambda = 0.02;  // > 0
  TieBreak tie_break = TieBreak::kRandomized;
  double fixed_u = 0.5;       // in [0,1], used when tie_break == kFixed
  std::uint64_t u_seed = 0;   // stream seed for randomized tie-breaking
};

void validate_score_spec(const ScoreSpec& spec);

std::string score_kind_name(ScoreKind kind);
ScoreKind score_kind_from_name(const std::string& name);

// Number of classes scoring at least p[y]; always in [1, K].
int label_rank(const Eigen::Ref<const Vector>& probs, int label);
IntVector label_ranks(const Eigen::Ref<const Matrix>& probs, const IntVector& labels);

double score_hps(const Eigen::Ref<const Vector>& probs, int label);
double score_aps(const Eigen::Ref<const Vector>& probs, int label, double u);
double score_raps(const Eigen::Ref<const Vector>& probs, int label, double u, double lambda,
                  int k_reg);
double score_saps(const Eigen::Ref<const Vector>& probs, int label, double u, double lambda);

// Dispatch on spec.kind with an explicit tie-break variable.
double score_label(const ScoreSpec& spec, const Eigen::Ref<const Vector>& probs, int label,
                   double u);

// Scores every candidate label with the same u; the shared draw keeps the
// rank/score ordering comparable across labels within one example.
Vector score_all_labels(const ScoreSpec& spec, const Eigen::Ref<const Vector>& probs, double u);

// Resolves the tie-break draw for an example addressed by (stream, index).
double tie_break_u(const ScoreSpec& spec, Stream stream, std::uint64_t example_index);

}  // namespace rwce
