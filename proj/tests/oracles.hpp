#pragma once

// Test-only reference implementations, kept independent of the library code
// they check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "rwce/model.hpp"

namespace oracle {

// erf via its Maclaurin series, accurate to ~1e-15 for |x| <= 4.
inline double erf_series(double x) {
  const double sign = x < 0 ? -1.0 : 1.0;
  x = std::abs(x);
  double term = x;
  double sum = x;
  for (int n = 1; n < 200; ++n) {
    term *= -x * x / n;
    sum += term / (2 * n + 1);
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  return sign * 2.0 / std::sqrt(M_PI) * sum;
}

// Random point on the probability simplex (uniform via exponential spacings).
inline rwce::Vector random_simplex(int k, std::mt19937_64& eng) {
  std::uniform_real_distribution<double> unit(1e-12, 1.0);
  rwce::Vector p(k);
  for (int i = 0; i < k; ++i) p[i] = -std::log(unit(eng));
  return p / p.sum();
}

// k-th smallest by full sort; +inf past the end.
inline double sorted_order_statistic(std::vector<double> values, int k) {
  if (k > static_cast<int>(values.size())) return std::numeric_limits<double>::infinity();
  std::sort(values.begin(), values.end());
  return values[static_cast<std::size_t>(k - 1)];
}

// Hard prediction-set size count at a fixed threshold.
inline int hard_set_size(const rwce::Vector& scores, double threshold) {
  int count = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    if (scores[i] <= threshold) ++count;
  return count;
}

// Central finite differences over every model parameter.
// Returns the max relative error against the analytic gradient.
inline double max_grad_rel_error(rwce::ModelParams model,
                                 const std::function<double(const rwce::ModelParams&)>& f,
                                 const rwce::GradientPack& analytic, double step = 1e-5) {
  double worst = 0.0;
  auto check_entry = [&](double* value, double grad) {
    const double saved = *value;
    *value = saved + step;
    const double up = f(model);
    *value = saved - step;
    const double down = f(model);
    *value = saved;
    const double fd = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(fd), std::abs(grad), 1e-6});
    worst = std::max(worst, std::abs(fd - grad) / denom);
  };
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    for (Eigen::Index i = 0; i < model.weights[l].size(); ++i)
      check_entry(model.weights[l].data() + i, analytic.weights[l].data()[i]);
    for (Eigen::Index i = 0; i < model.biases[l].size(); ++i)
      check_entry(model.biases[l].data() + i, analytic.biases[l].data()[i]);
  }
  return worst;
}

}  // namespace oracle
