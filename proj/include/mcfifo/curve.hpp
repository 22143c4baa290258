#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mcfifo/error.hpp"

namespace mcfifo {

// tau_k = k * tau_max / (points - 1), k = 0 .. points-1.
inline std::vector<double> uniform_grid(double tau_max_s, std::size_t points) {
  if (points < 2 || !(tau_max_s > 0.0) || !std::isfinite(tau_max_s)) {
    throw Error(ErrorKind::invalid_input, "grid needs >= 2 points and tau_max > 0");
  }
  std::vector<double> grid(points);
  const double step = tau_max_s / static_cast<double>(points - 1);
  for (std::size_t k = 0; k < points; ++k) grid[k] = static_cast<double>(k) * step;
  grid.back() = tau_max_s;
  return grid;
}

// Tail probabilities P{X > tau} (or >=) evaluated on a grid.
struct BoundCurve {
  std::vector<double> grid;
  std::vector<double> probs;
  std::string label;
  bool approximate = false;

  bool well_formed() const {
    if (grid.size() != probs.size() || grid.empty()) return false;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      if (!(probs[k] >= 0.0 && probs[k] <= 1.0)) return false;
      if (k > 0 && (!(grid[k] > grid[k - 1]) || probs[k] > probs[k - 1])) return false;
    }
    return true;
  }
};

namespace detail {

inline double grid_step(std::span<const double> grid) {
  if (grid.size() < 2 || grid.front() != 0.0) {
    throw Error(ErrorKind::invalid_input, "convolution needs a uniform grid starting at 0");
  }
  const double h = grid[1] - grid[0];
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double d = grid[k] - grid[k - 1];
    if (std::abs(d - h) > 1e-9 * h) throw Error(ErrorKind::invalid_input, "grid is not uniform");
  }
  return h;
}

// Tail value at an arbitrary point from samples on the grid; log-linear
// between neighbours (exact for exponential tails), 1 left of the grid.
inline double interpolate_tail(std::span<const double> grid, std::span<const double> tail, double x) {
  if (x <= grid.front()) return x < grid.front() ? 1.0 : tail.front();
  if (x >= grid.back()) return tail.back();
  const auto it = std::upper_bound(grid.begin(), grid.end(), x);
  const std::size_t hi = static_cast<std::size_t>(it - grid.begin());
  const std::size_t lo = hi - 1;
  if (x == grid[lo]) return tail[lo];
  const double w = (x - grid[lo]) / (grid[hi] - grid[lo]);
  if (tail[lo] > 0.0 && tail[hi] > 0.0) {
    return std::exp(std::log(tail[lo]) + w * (std::log(tail[hi]) - std::log(tail[lo])));
  }
  return tail[lo] + w * (tail[hi] - tail[lo]);
}

// CDF value at x from samples on a uniform grid with step h; linear
// interpolation, 0 left of the origin, last sample right of the grid.
inline double interpolate_cdf(std::span<const double> cdf, double h, double x) {
  if (x < 0.0) return 0.0;
  const double pos = x / h;
  const auto lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= cdf.size()) return cdf.back();
  const double w = pos - static_cast<double>(lo);
  return cdf[lo] + w * (cdf[lo + 1] - cdf[lo]);
}

// Stieltjes convolution (G * F)(tau_k) = int G(tau_k - y) dF(y) for CDFs sampled
// on the same uniform grid. F(0) is treated as an atom at the origin; the mass
// of each cell (tau_{i-1}, tau_i] is integrated against the trapezoid average
// of G over the cell, which is second order in the step.
inline std::vector<double> convolve_cdfs(std::span<const double> g, std::span<const double> f) {
  const std::size_t n = g.size();
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    double acc = f[0] * g[k];
    for (std::size_t i = 1; i <= k; ++i) acc += (f[i] - f[i - 1]) * 0.5 * (g[k - i] + g[k - i + 1]);
    out[k] = std::clamp(acc, 0.0, 1.0);
  }
  return out;
}

}  // namespace detail
}  // namespace mcfifo
