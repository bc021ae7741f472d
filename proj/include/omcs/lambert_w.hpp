#pragma once

#include <cmath>
#include <string>

#include "omcs/error.hpp"

namespace omcs {

// Principal branch W0 on [-1/e, inf), by Halley iteration.
//
// Initial guess: the branch-point series near -1/e, log(1+x) for moderate x
// and the two-term asymptotic log(x) - log(log(x)) for large x.
inline double lambert_w(double x) {
  constexpr double kInvE = 0.36787944117144233;
  if (std::isnan(x) || x < -kInvE - 1e-15) throw InvariantError("lambert_w: argument " + std::to_string(x) + " < -1/e");
  if (x == 0.0) return 0.0;
  if (x <= -kInvE) return -1.0;
  if (std::isinf(x)) return x;

  double w;
  if (x < -0.25) {
    const double p = std::sqrt(2.0 * (std::exp(1.0) * x + 1.0));
    w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
  } else if (x < 3.0) {
    w = std::log1p(x);
  } else {
    const double l1 = std::log(x);
    w = l1 - std::log(l1);
  }

  for (int it = 0; it < 64; ++it) {
    const double ew = std::exp(w);
    const double f = w * ew - x;
    const double wp1 = w + 1.0;
    if (wp1 == 0.0) break;
    const double step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
    w -= step;
    if (std::abs(step) <= 1e-15 * (1.0 + std::abs(w))) break;
  }
  return w;
}

}  // namespace omcs
