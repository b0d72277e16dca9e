#include "rwce/common.hpp"

#include <cmath>
#include <cstdio>

namespace rwce {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool is_probability_vector(const Eigen::Ref<const Vector>& p, double tol) {
  if (p.size() == 0) return false;
  if ((p.array() < 0.0).any()) return false;
  return std::abs(p.sum() - 1.0) <= tol;
}

}  // namespace rwce
