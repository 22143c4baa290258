#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mcfifo/curve.hpp"
#include "mcfifo/decay_rate.hpp"
#include "mcfifo/error.hpp"
#include "mcfifo/traffic.hpp"

namespace mcfifo {

struct ThetaSolution {
  enum class Method { exact_root, taylor_approx, closed_form };

  double theta_star = 0.0;
  Method method = Method::exact_root;
  // mgf(theta*) - 1 for exact roots; 0 for approximations and closed forms.
  double residual = 0.0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
};

inline const char* to_string(ThetaSolution::Method m) {
  switch (m) {
    case ThetaSolution::Method::exact_root: return "exact-root";
    case ThetaSolution::Method::taylor_approx: return "taylor-approx";
    case ThetaSolution::Method::closed_form: return "closed-form";
  }
  return "unknown";
}

struct StabilityReport {
  double rho = 0.0;
  bool theorem1_condition = false;  // sum r_n / C_n <= 1
  bool cruz_condition = false;      // sum r_n <= min C_n
};

inline StabilityReport stability(std::span<const ClassSpec> specs) {
  StabilityReport rep;
  double total_rate = 0.0;
  double min_c = std::numeric_limits<double>::infinity();
  for (const auto& s : specs) {
    s.validate();
    rep.rho += s.load();
    total_rate += s.traffic_rate_bps();
    min_c = std::min(min_c, s.service_rate_bps);
  }
  rep.theorem1_condition = rep.rho <= 1.0;
  rep.cruz_condition = total_rate <= min_c;
  return rep;
}

namespace detail {

inline void check_lengths(std::size_t a, std::size_t b) {
  if (a != b || a == 0) throw Error(ErrorKind::invalid_input, "envelopes and rates must have equal, nonzero length");
}

inline std::vector<double> probs_of(std::span<const double> grid, const std::function<double(double)>& tail) {
  std::vector<double> p(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) p[k] = std::clamp(tail(grid[k]), 0.0, 1.0);
  return p;
}

}  // namespace detail

// Multiclass D/D/1 delay bound: sum_n sigma_n / C_n, valid when sum_n r_n / C_n <= 1.
inline double bound_dd1(std::span<const DeterministicEnvelope> envelopes, std::span<const double> rates) {
  detail::check_lengths(envelopes.size(), rates.size());
  double load = 0.0;
  double bound = 0.0;
  for (std::size_t n = 0; n < envelopes.size(); ++n) {
    load += envelopes[n].rate_bps / rates[n];
    bound += envelopes[n].burst_bits / rates[n];
  }
  if (!(load <= 1.0)) throw Error(ErrorKind::condition_not_met, "sum r_n / C_n exceeds 1");
  return bound;
}

// Aggregate single-class bound sum sigma_n / min C_n; nullopt when
// sum r_n > min C_n (not applicable).
inline std::optional<double> bound_cruz_aggregate(std::span<const DeterministicEnvelope> envelopes,
                                                  std::span<const double> rates) {
  detail::check_lengths(envelopes.size(), rates.size());
  double r = 0.0;
  double sigma = 0.0;
  for (const auto& e : envelopes) {
    r += e.rate_bps;
    sigma += e.burst_bits;
  }
  const double min_c = *std::min_element(rates.begin(), rates.end());
  if (!(r <= min_c)) return std::nullopt;
  return sigma / min_c;
}

struct RootOptions {
  // Utilization; >= 1 means no positive root exists.
  std::optional<double> load;
  // The MGF is only finite below this point.
  double domain_edge = std::numeric_limits<double>::infinity();
};

// theta* = sup{theta > 0 : mgf(theta) <= 1} where mgf(theta) is
// E[exp(theta (sum_n A_n(1)/C_n - 1))].
template <typename Mgf>
ThetaSolution theta_exact(Mgf&& mgf, const RootOptions& opts = {}) {
  if (opts.load && !(*opts.load < 1.0)) throw Error(ErrorKind::no_positive_root, "load must be < 1");
  const auto sup = roots::sup_feasible(mgf, opts.domain_edge);
  return {sup.value, ThetaSolution::Method::exact_root, mgf(sup.value) - 1.0, sup.lo, sup.hi};
}

// E[exp(theta (sum_n A_n(1)/C_n - 1))] for Poisson classes treated as
// independent compound Poisson inputs.
struct CompoundPoissonMgf {
  std::vector<ClassSpec> specs;

  double log_value(double theta) const {
    double acc = -theta;
    for (const auto& s : specs) {
      const double y = s.mean_service_time();
      if (s.has_constant_size()) {
        acc += s.arrival_rate() * std::expm1(theta * y);
      } else {
        const double mu = 1.0 / y;
        if (theta >= mu) return std::numeric_limits<double>::infinity();
        acc += s.arrival_rate() * theta / (mu - theta);
      }
    }
    return acc;
  }

  double operator()(double theta) const { return std::exp(log_value(theta)); }

  double domain_edge() const {
    double edge = std::numeric_limits<double>::infinity();
    for (const auto& s : specs) {
      if (!s.has_constant_size()) edge = std::min(edge, s.service_rate());
    }
    return edge;
  }

  double load() const {
    double rho = 0.0;
    for (const auto& s : specs) rho += s.load();
    return rho;
  }
};

inline CompoundPoissonMgf compound_poisson_mgf(std::span<const ClassSpec> specs) {
  if (specs.empty()) throw Error(ErrorKind::invalid_spec, "no classes");
  for (const auto& s : specs) {
    s.validate();
    if (!s.is_poisson()) throw Error(ErrorKind::invalid_spec, "class " + std::to_string(s.class_id) + " is not Poisson");
  }
  return {std::vector<ClassSpec>(specs.begin(), specs.end())};
}

inline ThetaSolution theta_compound_poisson(std::span<const ClassSpec> specs) {
  const auto mgf = compound_poisson_mgf(specs);
  return theta_exact(mgf, {mgf.load(), mgf.domain_edge()});
}

struct ThetaPair {
  ThetaSolution exact;
  ThetaSolution approx;
};

namespace detail {

// sum_n X_n^{-1} Y_n^2
inline double second_moment_weight(std::span<const ClassSpec> specs) {
  double acc = 0.0;
  for (const auto& s : specs) acc += s.arrival_rate() * s.mean_service_time() * s.mean_service_time();
  return acc;
}

inline ThetaPair theta_pair(std::span<const ClassSpec> specs, bool constant_sizes) {
  for (const auto& s : specs) {
    if (!s.is_poisson() || s.has_constant_size() != constant_sizes) {
      throw Error(ErrorKind::invalid_spec, constant_sizes ? "M/D/1 needs Poisson classes of constant size"
                                                          : "M/M/1 needs Poisson classes of exponential size");
    }
  }
  ThetaPair out;
  out.exact = theta_compound_poisson(specs);
  const double rho = compound_poisson_mgf(specs).load();
  const double factor = constant_sizes ? 2.0 : 1.0;
  out.approx.theta_star = factor * (1.0 - rho) / second_moment_weight(specs);
  out.approx.method = ThetaSolution::Method::taylor_approx;
  return out;
}

}  // namespace detail

// Multiclass M/D/1: exact root of sum_n lambda_n (e^{theta Y_n} - 1) - theta = 0
// and the Taylor approximation 2 (1 - rho) / sum_n X_n^{-1} Y_n^2.
inline ThetaPair theta_md1(std::span<const ClassSpec> specs) { return detail::theta_pair(specs, true); }

// Multiclass M/M/1: exact root of sum_n lambda_n / (mu_n - theta) = 1 on
// (0, min mu_n) and the approximation (1 - rho) / sum_n X_n^{-1} Y_n^2.
inline ThetaPair theta_mm1(std::span<const ClassSpec> specs) { return detail::theta_pair(specs, false); }

// tau -> min(1, prefactor * e^{-theta* tau}). prefactor 1 is the
// continuous-time form; pass M(theta) for the discrete-time variant.
inline BoundCurve waiting_bound_curve(const ThetaSolution& theta, std::span<const double> grid,
                                      double prefactor = 1.0, std::string label = "waiting_bound") {
  if (!(theta.theta_star > 0.0)) throw Error(ErrorKind::invalid_input, "theta* must be > 0");
  const double t = theta.theta_star;
  return {std::vector<double>(grid.begin(), grid.end()),
          detail::probs_of(grid, [&](double tau) { return prefactor * std::exp(-t * tau); }), std::move(label),
          theta.method == ThetaSolution::Method::taylor_approx};
}

struct ConstantService {
  double seconds;
};

struct ExponentialService {
  double rate_per_s;
};

// Service-time CDF sampled on the same grid as the waiting curve.
struct SampledService {
  std::vector<double> cdf;
};

using ServiceDistribution = std::variant<ConstantService, ExponentialService, SampledService>;

inline ServiceDistribution service_distribution(const ClassSpec& spec) {
  if (spec.has_constant_size()) return ConstantService{spec.mean_service_time()};
  return ExponentialService{spec.service_rate()};
}

// P{D >= tau} <= 1 - F_Y * F_W(tau) with F_W = 1 - waiting tail. Constant
// service times are applied as exact shifts; other service laws are convolved
// numerically on the waiting curve's (uniform, 0-based) grid.
inline BoundCurve delay_bound_convolve(const ServiceDistribution& service, const BoundCurve& waiting) {
  const auto& grid = waiting.grid;
  if (grid.size() != waiting.probs.size() || grid.empty()) throw Error(ErrorKind::invalid_input, "malformed waiting curve");
  BoundCurve out{grid, std::vector<double>(grid.size()), "delay_" + waiting.label, waiting.approximate};

  if (const auto* c = std::get_if<ConstantService>(&service)) {
    if (!(c->seconds >= 0.0)) throw Error(ErrorKind::invalid_input, "service time must be >= 0");
    for (std::size_t k = 0; k < grid.size(); ++k) {
      out.probs[k] = detail::interpolate_tail(grid, waiting.probs, grid[k] - c->seconds);
    }
    return out;
  }

  detail::grid_step(grid);
  std::vector<double> f_service(grid.size());
  if (const auto* e = std::get_if<ExponentialService>(&service)) {
    if (!(e->rate_per_s > 0.0)) throw Error(ErrorKind::invalid_input, "service rate must be > 0");
    for (std::size_t k = 0; k < grid.size(); ++k) f_service[k] = -std::expm1(-e->rate_per_s * grid[k]);
  } else {
    f_service = std::get<SampledService>(service).cdf;
    if (f_service.size() != grid.size()) throw Error(ErrorKind::invalid_input, "service CDF grid mismatch");
    for (std::size_t k = 0; k < f_service.size(); ++k) {
      if (!(f_service[k] >= 0.0 && f_service[k] <= 1.0) || (k > 0 && f_service[k] < f_service[k - 1])) {
        throw Error(ErrorKind::invalid_input, "service CDF must be nondecreasing within [0, 1]");
      }
    }
  }
  std::vector<double> f_wait(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) f_wait[k] = 1.0 - waiting.probs[k];
  const auto conv = detail::convolve_cdfs(f_wait, f_service);
  for (std::size_t k = 0; k < grid.size(); ++k) out.probs[k] = std::clamp(1.0 - conv[k], 0.0, 1.0);
  // Keep the curve monotone against rounding in the quadrature.
  for (std::size_t k = 1; k < grid.size(); ++k) out.probs[k] = std::min(out.probs[k], out.probs[k - 1]);
  return out;
}

namespace detail {

inline void check_gsbb_rates(std::span<const GsbbTail> tails, std::span<const double> rates) {
  check_lengths(tails.size(), rates.size());
  double sum = 0.0;
  for (std::size_t n = 0; n < tails.size(); ++n) sum += tails[n].reference_rate_bps / rates[n];
  // 1e-12 absorbs rounding in weights constructed to sum to exactly 1.
  if (!(sum <= 1.0 + 1e-12)) throw Error(ErrorKind::condition_not_met, "sum R_n / C_n exceeds 1");
}

// min sum_n M_n e^{-a_n t_n} over t >= 0, sum t_n = budget. Water-filling:
// active classes share a common marginal a_n M_n e^{-a_n t_n} = e^{L}.
inline double waterfill_exponentials(std::span<const double> a, std::span<const double> m, double budget) {
  struct Item {
    double level;  // ln(a_n M_n)
    double a;
    double m;
  };
  std::vector<Item> items;
  double constant = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) {
    if (a[n] > 0.0 && m[n] > 0.0) {
      items.push_back({std::log(a[n] * m[n]), a[n], m[n]});
    } else {
      constant += std::min(1.0, m[n]);
    }
  }
  if (items.empty()) return constant;
  std::sort(items.begin(), items.end(), [](const Item& x, const Item& y) { return x.level > y.level; });
  double weighted = 0.0;  // sum level / a over the active set
  double inv = 0.0;       // sum 1 / a over the active set
  double water = 0.0;
  std::size_t active = 0;
  for (std::size_t k = 0; k < items.size(); ++k) {
    weighted += items[k].level / items[k].a;
    inv += 1.0 / items[k].a;
    water = (weighted - budget) / inv;
    active = k + 1;
    if (k + 1 == items.size() || water >= items[k + 1].level) break;
  }
  double total = constant;
  for (std::size_t k = 0; k < items.size(); ++k) {
    const double t = k < active ? std::max(0.0, (items[k].level - water) / items[k].a) : 0.0;
    total += std::min(1.0, items[k].m * std::exp(-items[k].a * t));
  }
  return total;
}

}  // namespace detail

// inf over p on the simplex of sum_n F_n(R_n, p_n C_n tau). Degenerate tails
// are either granted their full need sigma_n / C_n or nothing; the remaining
// time is water-filled across exponential tails in closed form.
inline double gsbb_bound_split(std::span<const GsbbTail> tails, std::span<const double> rates, double tau) {
  detail::check_gsbb_rates(tails, rates);
  if (!(tau > 0.0)) {
    double s = 0.0;
    for (const auto& t : tails) s += t.evaluate(0.0);
    return std::clamp(s, 0.0, 1.0);
  }
  std::vector<double> need;  // seconds, per degenerate tail
  std::vector<double> a;
  std::vector<double> m;
  for (std::size_t n = 0; n < tails.size(); ++n) {
    if (tails[n].form == GsbbTail::Form::degenerate) {
      need.push_back(tails[n].burst_bits / rates[n]);
    } else {
      a.push_back(tails[n].decay_per_bit * rates[n]);
      m.push_back(tails[n].prefactor);
    }
  }
  if (need.size() > 20) throw Error(ErrorKind::invalid_input, "too many degenerate tails");
  double best = std::numeric_limits<double>::infinity();
  const std::uint64_t subsets = std::uint64_t{1} << need.size();
  for (std::uint64_t mask = 0; mask < subsets; ++mask) {
    double used = 0.0;
    double penalty = 0.0;
    for (std::size_t d = 0; d < need.size(); ++d) {
      if (mask & (std::uint64_t{1} << d)) {
        used += need[d];
      } else if (need[d] > 0.0) {
        penalty += 1.0;
      }
    }
    if (!(used <= tau)) continue;
    best = std::min(best, penalty + detail::waterfill_exponentials(a, m, tau - used));
  }
  return std::clamp(best, 0.0, 1.0);
}

// 1 - F_1 * ... * F_N(R_n, C_n tau) for independent classes.
inline BoundCurve gsbb_bound_convolution(std::span<const GsbbTail> tails, std::span<const double> rates,
                                         std::span<const double> grid, bool independent = true) {
  detail::check_gsbb_rates(tails, rates);
  if (!independent) {
    throw Error(ErrorKind::invalid_input, "convolution bound needs independent classes; use gsbb_bound_split");
  }
  const double h = detail::grid_step(grid);
  double shift = 0.0;
  std::vector<double> acc;
  for (std::size_t n = 0; n < tails.size(); ++n) {
    if (tails[n].form == GsbbTail::Form::degenerate) {
      shift += tails[n].burst_bits / rates[n];
      continue;
    }
    std::vector<double> cdf(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) cdf[k] = 1.0 - tails[n].evaluate(rates[n] * grid[k]);
    acc = acc.empty() ? std::move(cdf) : detail::convolve_cdfs(acc, cdf);
  }
  BoundCurve out{std::vector<double>(grid.begin(), grid.end()), std::vector<double>(grid.size()),
                 "gsbb_convolution", false};
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double x = grid[k] - shift;
    if (acc.empty()) {
      out.probs[k] = x >= 0.0 ? 0.0 : 1.0;
    } else {
      out.probs[k] = std::clamp(1.0 - detail::interpolate_cdf(acc, h, x), 0.0, 1.0);
    }
  }
  return out;
}

// Weights omega_n = rho_n + theta X_n^{-1} Y_n^2 / 2 that equalize the per-class
// M/D decay rates; sum omega_n = 1 fixes theta at the M/D/1 approximation.
struct EqualizedWeights {
  std::vector<double> omega;
  double theta = 0.0;
};

inline EqualizedWeights md1_equalized_weights(std::span<const ClassSpec> specs) {
  const auto pair = theta_md1(specs);
  EqualizedWeights w{{}, pair.approx.theta_star};
  for (const auto& s : specs) {
    const double y = s.mean_service_time();
    w.omega.push_back(s.load() + w.theta * s.arrival_rate() * y * y / 2.0);
  }
  return w;
}

// M*/D/1 (arbitrary dependence): tau -> min(1, N e^{-theta* tau / N}).
// Marked approximate: it rests on the Taylor form of the per-class rates.
inline BoundCurve bound_mstar_d1(std::span<const ClassSpec> specs, std::span<const double> grid) {
  const auto pair = theta_md1(specs);
  const double n = static_cast<double>(specs.size());
  const double t = pair.approx.theta_star;
  return {std::vector<double>(grid.begin(), grid.end()),
          detail::probs_of(grid, [&](double tau) { return n * std::exp(-t * tau / n); }), "mstar_d1_waiting", true};
}

struct DmDmSolution {
  ThetaSolution theta;
  double shift_s = 0.0;  // Y_1 = l_1 / C_1
  std::size_t periodic_index = 0;
  std::size_t poisson_index = 1;
};

// Two classes, one periodic of constant size and one Poisson with exponential
// sizes: theta* = mu_2 - lambda_2 / (1 - rho_1).
inline DmDmSolution dmdm_theta(std::span<const ClassSpec> specs) {
  if (specs.size() != 2) throw Error(ErrorKind::invalid_spec, "DM/DM/1 needs exactly two classes");
  DmDmSolution sol;
  if (specs[0].is_periodic() && specs[1].is_poisson()) {
    sol.periodic_index = 0;
    sol.poisson_index = 1;
  } else if (specs[1].is_periodic() && specs[0].is_poisson()) {
    sol.periodic_index = 1;
    sol.poisson_index = 0;
  } else {
    throw Error(ErrorKind::invalid_spec, "DM/DM/1 needs one periodic and one Poisson class");
  }
  const auto& d = specs[sol.periodic_index];
  const auto& m = specs[sol.poisson_index];
  d.validate();
  m.validate();
  if (!d.has_constant_size() || m.has_constant_size()) {
    throw Error(ErrorKind::invalid_spec, "DM/DM/1 needs D/D and M/M classes");
  }
  const double r1 = deterministic_envelope(d).rate_bps;
  const double c1 = d.service_rate_bps;
  if (!(r1 < c1)) throw Error(ErrorKind::condition_not_met, "periodic class saturates the server");
  // lambda_2 / (1 - rho_1) written as lambda_2 C_1 / (C_1 - r_1) to avoid the
  // cancellation in 1 - rho_1.
  const double theta = m.service_rate() - m.arrival_rate() * (c1 / (c1 - r1));
  if (!(theta > 0.0)) throw Error(ErrorKind::condition_not_met, "decay rate mu_2 - lambda_2 / (1 - rho_1) <= 0");
  sol.theta = {theta, ThetaSolution::Method::closed_form, 0.0, theta, theta};
  sol.shift_s = d.mean_service_time();
  return sol;
}

// Waiting-time bound for the class with the given id. The Poisson class's
// bound on W_2 - Y_1 is returned shifted by Y_1, i.e. as a bound on P{W_2 > tau}.
inline BoundCurve bound_dmdm(std::span<const ClassSpec> specs, std::span<const double> grid, int class_id) {
  const auto sol = dmdm_theta(specs);
  const double t = sol.theta.theta_star;
  double shift = 0.0;
  if (specs[sol.poisson_index].class_id == class_id) {
    shift = sol.shift_s;
  } else if (specs[sol.periodic_index].class_id != class_id) {
    throw Error(ErrorKind::invalid_input, "unknown class id " + std::to_string(class_id));
  }
  return {std::vector<double>(grid.begin(), grid.end()),
          detail::probs_of(grid, [&](double tau) { return tau < shift ? 1.0 : std::exp(-t * (tau - shift)); }),
          "dmdm_waiting_class" + std::to_string(class_id), false};
}

// Single-class GI/GI/1 input for the classical exponential waiting bound.
struct Gi1Input {
  std::function<double(double)> interarrival_mgf;  // s -> E[e^{s X}]
  std::function<double(double)> service_mgf;       // s -> E[e^{s Y}]
  double mean_interarrival = 0.0;
  double mean_service = 0.0;
  double service_mgf_edge = std::numeric_limits<double>::infinity();
};

inline std::function<double(double)> mgf_exponential(double rate) {
  return [rate](double s) { return s < rate ? rate / (rate - s) : std::numeric_limits<double>::infinity(); };
}

inline std::function<double(double)> mgf_constant(double value) {
  return [value](double s) { return std::exp(s * value); };
}

struct KingmanResult {
  ThetaSolution theta;  // vartheta
  BoundCurve curve;
};

// vartheta = sup{theta > 0 : M_{Y-X}(theta) < 1}, curve e^{-vartheta tau}.
inline KingmanResult kingman_reference(const Gi1Input& in, std::span<const double> grid) {
  if (!(in.mean_service < in.mean_interarrival)) throw Error(ErrorKind::no_positive_root, "E[Y] >= E[X]");
  auto mgf = [&](double theta) { return in.service_mgf(theta) * in.interarrival_mgf(-theta); };
  KingmanResult out{theta_exact(mgf, {std::nullopt, in.service_mgf_edge}), {}};
  out.curve = waiting_bound_curve(out.theta, grid, 1.0, "kingman_waiting");
  return out;
}

}  // namespace mcfifo
