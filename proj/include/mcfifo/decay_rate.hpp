#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "mcfifo/error.hpp"

namespace mcfifo::roots {

struct Supremum {
  double value;
  double lo;  // largest point known feasible
  double hi;  // smallest point known infeasible (== lo when capped at the domain edge)
};

inline constexpr double kRelativeTolerance = 1e-12;

// sup{theta > 0 : mgf(theta) <= 1} for a convex MGF-type condition with
// mgf(0) = 1 and negative slope at the origin. Non-finite values count as
// violations, so a divergent MGF near its domain edge behaves like an
// infeasible point. Bracket by doubling/halving from theta = 1, then bisect.
template <typename Mgf>
Supremum sup_feasible(Mgf&& mgf, double domain_edge = std::numeric_limits<double>::infinity()) {
  auto feasible = [&](double theta) {
    const double v = mgf(theta);
    return std::isfinite(v) && v <= 1.0;
  };
  const double cap = std::isfinite(domain_edge) ? domain_edge * (1.0 - 1e-12)
                                                : std::numeric_limits<double>::infinity();
  double lo = 0.0;
  double hi = 0.0;
  double theta = std::min(1.0, cap * 0.5);
  if (feasible(theta)) {
    lo = theta;
    for (;;) {
      const double next = 2.0 * lo;
      if (next >= cap) {
        if (feasible(cap)) return {cap, cap, cap};
        hi = cap;
        break;
      }
      if (!feasible(next)) {
        hi = next;
        break;
      }
      lo = next;
      if (lo > 1e300) throw Error(ErrorKind::invalid_input, "decay rate is unbounded");
    }
  } else {
    hi = theta;
    for (;;) {
      theta *= 0.5;
      if (theta < 1e-300) throw Error(ErrorKind::no_positive_root, "no feasible theta > 0");
      if (feasible(theta)) {
        lo = theta;
        break;
      }
      hi = theta;
    }
  }
  while (hi - lo > kRelativeTolerance * hi) {
    const double mid = lo + 0.5 * (hi - lo);
    if (feasible(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return {lo, lo, hi};
}

}  // namespace mcfifo::roots
