#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mcfifo/traffic.hpp"

namespace mcfifo {

enum class BoundKind {
  theorem1,      // multiclass D/D/1 delay bound
  cruz,          // aggregate single-class D/D/1 delay bound
  md1_exact,     // M/D/1 exact theta*
  md1_approx,    // M/D/1 Taylor theta*
  mm1_exact,     // M/M/1 exact theta*
  mm1_approx,    // M/M/1 Taylor theta*
  compound,      // exact theta* for mixed compound-Poisson classes
  mstar_d1,      // N e^{-theta* tau / N}, any dependence
  dmdm,          // D/D + M/M two-class bound, per class
};

inline const char* to_string(BoundKind k) {
  switch (k) {
    case BoundKind::theorem1: return "theorem1";
    case BoundKind::cruz: return "cruz";
    case BoundKind::md1_exact: return "md1_exact";
    case BoundKind::md1_approx: return "md1_approx";
    case BoundKind::mm1_exact: return "mm1_exact";
    case BoundKind::mm1_approx: return "mm1_approx";
    case BoundKind::compound: return "compound_exact";
    case BoundKind::mstar_d1: return "mstar_d1";
    case BoundKind::dmdm: return "dmdm";
  }
  return "unknown";
}

struct CaseConfig {
  int case_id = 0;  // 1..6 for presets, 0 for custom
  std::string name = "custom";
  std::vector<ClassSpec> classes;
  std::size_t customers = 1'000'000;
  std::uint64_t seed = 1;
  double tau_max_s = 0.01;
  std::size_t grid_points = 2000;
  double warmup_fraction = 0.1;
  std::vector<BoundKind> bounds;
  // Transient study: replications of the first customers of one class.
  std::size_t replications = 0;
  int transient_class = 1;
  std::vector<std::size_t> transient_indices{1, 10, 100};

  bool all_periodic() const {
    for (const auto& c : classes) {
      if (!c.is_periodic()) return false;
    }
    return true;
  }

  bool has_coupling() const {
    for (const auto& c : classes) {
      if (c.is_coupled()) return true;
    }
    return false;
  }

  const ClassSpec& spec_of(int class_id) const {
    for (const auto& c : classes) {
      if (c.class_id == class_id) return c;
    }
    throw Error(ErrorKind::invalid_input, "no class with id " + std::to_string(class_id));
  }
};

// The bounds whose assumptions the class mix can satisfy.
inline std::vector<BoundKind> detect_bounds(const std::vector<ClassSpec>& classes) {
  bool periodic_const = true;
  bool poisson_const = true;
  bool poisson_exp = true;
  bool poisson = true;
  for (const auto& c : classes) {
    periodic_const = periodic_const && c.is_periodic() && c.has_constant_size();
    poisson_const = poisson_const && c.is_poisson() && c.has_constant_size();
    poisson_exp = poisson_exp && c.is_poisson() && !c.has_constant_size();
    poisson = poisson && c.is_poisson();
  }
  if (classes.empty()) return {};
  if (periodic_const) return {BoundKind::theorem1, BoundKind::cruz};
  if (poisson_const) return {BoundKind::md1_exact, BoundKind::md1_approx, BoundKind::mstar_d1};
  if (poisson_exp) return {BoundKind::mm1_exact, BoundKind::mm1_approx};
  if (poisson) return {BoundKind::compound};
  if (classes.size() == 2) {
    const auto& a = classes[0];
    const auto& b = classes[1];
    const bool dm = (a.is_periodic() && a.has_constant_size() && b.is_poisson() && !b.has_constant_size()) ||
                    (b.is_periodic() && b.has_constant_size() && a.is_poisson() && !a.has_constant_size());
    if (dm) return {BoundKind::dmdm};
  }
  return {};
}

}  // namespace mcfifo
