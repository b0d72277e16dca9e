#pragma once

#include <cmath>
#include <limits>
#include <vector>

namespace rwce {

// ceil with a 1e-9 guard so exact-integer levels like (1-0.1)*10 do not get
// bumped up by binary representation noise.
inline int guarded_ceil(double x) { return static_cast<int>(std::ceil(x - 1e-9)); }

// Index of the split-conformal order statistic: the ceil((1-alpha)(m+1))-th
// smallest of m calibration scores. May exceed m; callers map that to +inf.
inline int conformal_quantile_index(double alpha, int m) {
  return guarded_ceil((1.0 - alpha) * static_cast<double>(m + 1));
}

// k-th smallest value (1-based) of an unsorted sample; +inf when k > size.
double order_statistic(std::vector<double> values, int k);

// Split-conformal threshold from raw calibration scores.
double conformal_threshold(std::vector<double> scores, double alpha);

}  // namespace rwce
