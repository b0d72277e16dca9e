#include "rwce/quantile.hpp"

#include <algorithm>

#include "rwce/common.hpp"

namespace rwce {

double order_statistic(std::vector<double> values, int k) {
  const int m = static_cast<int>(values.size());
  if (m == 0) throw ConfigError("order_statistic: empty sample");
  if (k < 1) throw ConfigError("order_statistic: index must be >= 1");
  if (k > m) return std::numeric_limits<double>::infinity();
  std::sort(values.begin(), values.end());
  return values[static_cast<std::size_t>(k - 1)];
}

double conformal_threshold(std::vector<double> scores, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must be in (0,1)");
  const int m = static_cast<int>(scores.size());
  if (m == 0) throw ConfigError("calibration: empty score set");
  return order_statistic(std::move(scores), conformal_quantile_index(alpha, m));
}

}  // namespace rwce
