#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "rwce/nonconformity.hpp"

using namespace rwce;

namespace {

Vector vec3(double a, double b, double c) {
  Vector v(3);
  v << a, b, c;
  return v;
}

}  // namespace

TEST_CASE("label rank follows the counting definition") {
  const Vector p = vec3(0.1, 0.6, 0.3);
  CHECK(label_rank(p, 1) == 1);  // top class
  CHECK(label_rank(p, 0) == 3);  // bottom class
  CHECK(label_rank(p, 2) == 2);
  Vector tied(2);
  tied << 0.5, 0.5;
  CHECK(label_rank(tied, 0) == 2);  // ties count against the label
  CHECK(label_rank(tied, 1) == 2);
}

TEST_CASE("rank bounds hold on random simplices") {
  std::mt19937_64 eng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const int k = 2 + static_cast<int>(eng() % 5);
    const Vector p = oracle::random_simplex(k, eng);
    for (int y = 0; y < k; ++y) {
      const int r = label_rank(p, y);
      CHECK(r >= 1);
      CHECK(r <= k);
    }
  }
}

TEST_CASE("label out of range raises") {
  const Vector p = vec3(0.2, 0.5, 0.3);
  CHECK_THROWS_AS((void)label_rank(p, 3), ConfigError);
  CHECK_THROWS_AS((void)score_hps(p, -1), ConfigError);
}

TEST_CASE("hps substitution identities") {
  CHECK(score_hps(vec3(0.2, 0.7, 0.1), 1) == doctest::Approx(0.3).epsilon(1e-15));
  Vector sure(2);
  sure << 1.0, 0.0;
  CHECK(score_hps(sure, 0) == doctest::Approx(0.0));
  const Vector uniform4 = Vector::Constant(4, 0.25);
  CHECK(score_hps(uniform4, 2) == doctest::Approx(0.75));
}

TEST_CASE("aps prefix sums with explicit tie-break values") {
  const Vector p = vec3(0.5, 0.3, 0.2);
  CHECK(score_aps(p, 1, 0.0) == doctest::Approx(0.5));   // rank 2, u = 0
  CHECK(score_aps(p, 1, 1.0) == doctest::Approx(0.8));   // rank 2, u = 1
  CHECK(score_aps(p, 0, 0.0) == doctest::Approx(0.0));   // rank 1, empty prefix
}

TEST_CASE("raps adds the rank penalty beyond k_reg") {
  const Vector p = vec3(0.5, 0.3, 0.2);
  CHECK(score_raps(p, 2, 0.5, 0.1, 1) == doctest::Approx(1.1));  // 0.5+0.3+0.1+0.2
  // rank <= k_reg collapses to aps
  CHECK(score_raps(p, 1, 0.25, 0.1, 2) == doctest::Approx(score_aps(p, 1, 0.25)));
  // lambda = 0 collapses for every label
  for (int y = 0; y < 3; ++y)
    CHECK(score_raps(p, y, 0.7, 0.0, 1) == doctest::Approx(score_aps(p, y, 0.7)));
}

TEST_CASE("saps keeps only the top probability plus rank penalty") {
  const Vector p = vec3(0.5, 0.3, 0.2);
  CHECK(score_saps(p, 0, 0.4, 0.02) == doctest::Approx(0.2));          // rank 1: u * p_(1)
  CHECK(score_saps(p, 2, 0.5, 0.2) == doctest::Approx(0.8));           // 0.5 + 0.2*1.5
  CHECK(score_saps(p, 1, 0.0, 0.37) == doctest::Approx(0.5));          // rank 2, u=0: p_(1)
}

TEST_CASE("score_all_labels matches the per-label scorers") {
  ScoreSpec spec;
  std::mt19937_64 eng(17);
  for (auto kind : {ScoreKind::kHps, ScoreKind::kAps, ScoreKind::kRaps, ScoreKind::kSaps}) {
    spec.kind = kind;
    for (int trial = 0; trial < 200; ++trial) {
      const int k = 2 + static_cast<int>(eng() % 5);
      const Vector p = oracle::random_simplex(k, eng);
      const double u = std::uniform_real_distribution<double>(0, 1)(eng);
      const Vector all = score_all_labels(spec, p, u);
      for (int y = 0; y < k; ++y)
        CHECK(all[y] == doctest::Approx(score_label(spec, p, y, u)).epsilon(1e-12));
    }
  }
}

TEST_CASE("hps over a fixed vector") {
  const Vector p = vec3(0.5, 0.3, 0.2);
  ScoreSpec spec;
  const Vector scores = score_all_labels(spec, p, 0.0);
  CHECK(scores[0] == doctest::Approx(0.5));
  CHECK(scores[1] == doctest::Approx(0.7));
  CHECK(scores[2] == doctest::Approx(0.8));
}

TEST_CASE("rank/score coherence for hps and aps with a shared draw") {
  // Brute-force oracle over random simplices: strictly smaller rank must give
  // a strictly smaller score, equal ranks an equal score.
  std::mt19937_64 eng(29);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ScoreSpec hps;
  ScoreSpec aps;
  aps.kind = ScoreKind::kAps;
  for (int trial = 0; trial < 10000; ++trial) {
    const int k = 2 + static_cast<int>(eng() % 5);
    const Vector p = oracle::random_simplex(k, eng);
    const double u = unit(eng);
    for (const ScoreSpec& spec : {hps, aps}) {
      const Vector scores = score_all_labels(spec, p, u);
      for (int a = 0; a < k; ++a) {
        for (int b = 0; b < k; ++b) {
          const int ra = label_rank(p, a);
          const int rb = label_rank(p, b);
          if (ra < rb) CHECK(scores[a] < scores[b]);
          if (ra == rb) CHECK(scores[a] == doctest::Approx(scores[b]).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("aps scores strictly increase with rank under a shared u") {
  std::mt19937_64 eng(31);
  ScoreSpec aps;
  aps.kind = ScoreKind::kAps;
  for (int trial = 0; trial < 2000; ++trial) {
    const int k = 2 + static_cast<int>(eng() % 5);
    const Vector p = oracle::random_simplex(k, eng);
    const double u = std::uniform_real_distribution<double>(0, 1)(eng);
    const Vector scores = score_all_labels(aps, p, u);
    std::vector<std::pair<int, double>> by_rank;
    for (int y = 0; y < k; ++y) by_rank.emplace_back(label_rank(p, y), scores[y]);
    std::sort(by_rank.begin(), by_rank.end());
    for (std::size_t i = 1; i < by_rank.size(); ++i)
      CHECK(by_rank[i].second > by_rank[i - 1].second);
  }
}

TEST_CASE("hps and aps scores stay in [0,1]") {
  std::mt19937_64 eng(37);
  ScoreSpec hps;
  ScoreSpec aps;
  aps.kind = ScoreKind::kAps;
  for (int trial = 0; trial < 2000; ++trial) {
    const int k = 2 + static_cast<int>(eng() % 6);
    const Vector p = oracle::random_simplex(k, eng);
    const double u = std::uniform_real_distribution<double>(0, 1)(eng);
    for (const ScoreSpec& spec : {hps, aps}) {
      const Vector scores = score_all_labels(spec, p, u);
      CHECK(scores.minCoeff() >= 0.0);
      CHECK(scores.maxCoeff() <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("raps dominates aps pointwise") {
  std::mt19937_64 eng(41);
  ScoreSpec raps;
  raps.kind = ScoreKind::kRaps;
  raps.raps_lambda = 0.05;
  raps.raps_k_reg = 2;
  ScoreSpec aps;
  aps.kind = ScoreKind::kAps;
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 2 + static_cast<int>(eng() % 5);
    const Vector p = oracle::random_simplex(k, eng);
    const double u = std::uniform_real_distribution<double>(0, 1)(eng);
    const Vector r = score_all_labels(raps, p, u);
    const Vector a = score_all_labels(aps, p, u);
    for (int y = 0; y < k; ++y) {
      CHECK(r[y] >= a[y] - 1e-15);
      const bool equal = std::abs(r[y] - a[y]) < 1e-15;
      CHECK(equal == (label_rank(p, y) <= raps.raps_k_reg));
    }
  }
}

TEST_CASE("saps rank >= 2 scores differ by exact multiples of lambda") {
  ScoreSpec saps;
  saps.kind = ScoreKind::kSaps;
  saps.saps_lambda = 0.02;
  Vector p(4);
  p << 0.4, 0.3, 0.2, 0.1;
  const Vector scores = score_all_labels(saps, p, 0.25);
  CHECK(scores[2] - scores[1] == doctest::Approx(saps.saps_lambda).epsilon(1e-12));
  CHECK(scores[3] - scores[2] == doctest::Approx(saps.saps_lambda).epsilon(1e-12));
}

TEST_CASE("seeded tie-break streams reproduce") {
  ScoreSpec spec;
  spec.kind = ScoreKind::kAps;
  spec.u_seed = 777;
  const double a = tie_break_u(spec, Stream::kCalibrationU, 5);
  const double b = tie_break_u(spec, Stream::kCalibrationU, 5);
  const double c = tie_break_u(spec, Stream::kCalibrationU, 6);
  CHECK(a == b);
  CHECK(a != c);
  CHECK(a >= 0.0);
  CHECK(a <= 1.0);
  spec.tie_break = TieBreak::kFixed;
  spec.fixed_u = 0.25;
  CHECK(tie_break_u(spec, Stream::kCalibrationU, 123) == 0.25);
}

TEST_CASE("spec validation catches bad hyperparameters") {
  ScoreSpec raps;
  raps.kind = ScoreKind::kRaps;
  raps.raps_lambda = -0.1;
  CHECK_THROWS_AS(validate_score_spec(raps), ConfigError);
  ScoreSpec saps;
  saps.kind = ScoreKind::kSaps;
  saps.saps_lambda = 0.0;
  CHECK_THROWS_AS(validate_score_spec(saps), ConfigError);
  CHECK_THROWS_AS((void)score_saps(vec3(0.5, 0.3, 0.2), 0, 0.5, 0.0), ConfigError);
  CHECK_THROWS_AS((void)score_raps(vec3(0.5, 0.3, 0.2), 0, 0.5, -1.0, 1), ConfigError);
}
