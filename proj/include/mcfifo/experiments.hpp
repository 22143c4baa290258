#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mcfifo/analytic.hpp"
#include "mcfifo/config.hpp"
#include "mcfifo/curve.hpp"
#include "mcfifo/error.hpp"
#include "mcfifo/simulator.hpp"
#include "mcfifo/traffic.hpp"

namespace mcfifo {

namespace detail {

inline ClassSpec periodic_class(int id, double period_s, double bits, double rate_bps) {
  return {id, Periodic{period_s, std::nullopt}, ConstantSize{bits}, rate_bps};
}

}  // namespace detail

// The six two-class experiments. Case 1/2: D/D/1; 3: M/D/1; 4: M/M/1;
// 5: M/D/1 with coupled interarrivals; 6: D/D + M/M.
inline CaseConfig preset(int case_id) {
  constexpr double l1 = 100 * 8.0;    // 100 bytes
  constexpr double l2 = 1250 * 8.0;   // 1250 bytes
  constexpr double x1 = 0.1e-3;
  constexpr double x2 = 1e-3;
  constexpr double c2 = 100e6;
  CaseConfig cfg;
  cfg.case_id = case_id;
  switch (case_id) {
    case 1:
    case 2: {
      const double c1 = case_id == 1 ? 20e6 : 10e6;
      cfg.name = case_id == 1 ? "case1 D/D/1" : "case2 D/D/1";
      cfg.classes = {detail::periodic_class(1, x1, l1, c1), detail::periodic_class(2, x2, l2, c2)};
      cfg.tau_max_s = 1e-3;
      cfg.bounds = {BoundKind::theorem1, BoundKind::cruz};
      break;
    }
    case 3:
      cfg.name = "case3 M/D/1";
      cfg.classes = {{1, Poisson{1.0 / x1}, ConstantSize{l1}, 10e6}, {2, Poisson{1.0 / x2}, ConstantSize{l2}, c2}};
      cfg.tau_max_s = 6e-3;
      cfg.bounds = {BoundKind::md1_exact, BoundKind::md1_approx};
      cfg.replications = 10'000;
      break;
    case 4:
      cfg.name = "case4 M/M/1";
      cfg.classes = {{1, Poisson{1.0 / x1}, ExponentialSize{l1}, 10e6},
                     {2, Poisson{1.0 / x2}, ExponentialSize{l2}, c2}};
      cfg.tau_max_s = 12e-3;
      cfg.bounds = {BoundKind::mm1_exact, BoundKind::mm1_approx};
      break;
    case 5:
      cfg.name = "case5 M*/D/1";
      cfg.classes = {{1, CoupledPoisson{1.0 / x1, 1}, ConstantSize{l1}, 10e6},
                     {2, CoupledPoisson{1.0 / x2, 1}, ConstantSize{l2}, c2}};
      cfg.tau_max_s = 10e-3;
      cfg.bounds = {BoundKind::md1_exact, BoundKind::md1_approx, BoundKind::mstar_d1};
      break;
    case 6:
      cfg.name = "case6 DM/DM/1";
      cfg.classes = {detail::periodic_class(1, x1, l1, 10e6), {2, Poisson{1.0 / x2}, ExponentialSize{l2}, c2}};
      cfg.tau_max_s = 4e-3;
      cfg.bounds = {BoundKind::dmdm};
      break;
    default:
      throw Error(ErrorKind::unknown_case, "case id must be in 1..6, got " + std::to_string(case_id));
  }
  return cfg;
}

// One line per class, canonical units; used for listing and golden checks.
inline std::string describe(const CaseConfig& cfg) {
  std::ostringstream os;
  os.precision(12);
  os << cfg.name << '\n';
  for (const auto& c : cfg.classes) {
    os << "  class " << c.class_id << ": ";
    if (const auto* p = std::get_if<Periodic>(&c.arrival)) {
      os << "periodic X=" << p->period_s << "s";
      if (p->phase_s) os << " phase=" << *p->phase_s << "s";
    } else if (const auto* q = std::get_if<Poisson>(&c.arrival)) {
      os << "poisson lambda=" << q->rate_per_s << "/s";
    } else {
      const auto& cp = std::get<CoupledPoisson>(c.arrival);
      os << "coupled-poisson lambda=" << cp.rate_per_s << "/s group=" << cp.coupling_group;
    }
    if (c.has_constant_size()) {
      os << " size=" << std::get<ConstantSize>(c.size).bits << "b";
    } else {
      os << " size~exp(mean " << std::get<ExponentialSize>(c.size).mean_bits << "b)";
    }
    os << " C=" << c.service_rate_bps << "bps\n";
  }
  return os.str();
}

// Every class emits one burst of sigma_n bits right at time 0 (back to back in
// class order), then keeps to its envelope with period sigma_n / r_n. The
// customer served last in that burst sees delay sum_n sigma_n / C_n.
inline CaseConfig tightness_scenario(std::span<const DeterministicEnvelope> envelopes, std::span<const double> rates) {
  if (envelopes.size() != rates.size() || envelopes.empty()) {
    throw Error(ErrorKind::invalid_input, "envelopes and rates must have equal, nonzero length");
  }
  CaseConfig cfg;
  cfg.name = "tightness";
  for (std::size_t n = 0; n < envelopes.size(); ++n) {
    const auto& e = envelopes[n];
    if (!(e.rate_bps > 0.0 && e.burst_bits > 0.0)) {
      throw Error(ErrorKind::invalid_spec, "tightness scenario needs r > 0 and sigma > 0");
    }
    cfg.classes.push_back(
        {static_cast<int>(n + 1), Periodic{e.burst_bits / e.rate_bps, 0.0}, ConstantSize{e.burst_bits}, rates[n]});
  }
  cfg.customers = 1000 * envelopes.size();
  cfg.warmup_fraction = 0.0;
  cfg.tau_max_s = 1e-3;
  cfg.bounds = {BoundKind::theorem1};
  return cfg;
}

struct ComparisonOptions {
  double slack_sigmas = 3.0;
  // Grid points are only judged where p_hat exceeds both min_prob and
  // min_count / n (tail noise floor).
  double min_prob = 1e-5;
  double min_count = 10.0;
  // Rounding floor for deterministic (zero-slack) bounds, seconds.
  double deterministic_tolerance_s = 1e-12;
  unsigned jobs = 1;
};

struct EmpiricalEntry {
  std::string label;
  EmpiricalCCDF ccdf;
};

struct TargetCheck {
  std::string empirical_label;
  std::size_t violations = 0;
  double max_excess = 0.0;  // largest p_hat - bound (or delay - bound for deterministic bounds)
};

struct BoundEntry {
  std::string label;
  BoundKind kind = BoundKind::theorem1;
  bool applicable = true;
  bool approximate = false;
  std::optional<double> value_s;  // deterministic delay bounds
  std::optional<ThetaSolution> theta;
  BoundCurve curve;
  std::vector<TargetCheck> checks;
  std::string note;

  bool guaranteed() const { return applicable && !approximate; }
  std::size_t violations() const {
    std::size_t v = 0;
    for (const auto& c : checks) v += c.violations;
    return v;
  }
};

struct ComparisonResult {
  CaseConfig config;
  StabilityReport stability;
  std::size_t customers = 0;
  double max_delay_s = 0.0;
  std::vector<EmpiricalEntry> empirical;
  std::vector<BoundEntry> bounds;

  const EmpiricalEntry* find_empirical(const std::string& label) const {
    for (const auto& e : empirical) {
      if (e.label == label) return &e;
    }
    return nullptr;
  }
  const BoundEntry* find_bound(const std::string& label) const {
    for (const auto& b : bounds) {
      if (b.label == label) return &b;
    }
    return nullptr;
  }
  bool guaranteed_violation() const {
    for (const auto& b : bounds) {
      if (b.guaranteed() && b.violations() > 0) return true;
    }
    return false;
  }
};

// Grid points where the empirical tail exceeds the bound by more than
// slack_sigmas binomial standard errors, above the noise floor.
inline TargetCheck check_curve(const EmpiricalEntry& emp, const BoundCurve& bound, const ComparisonOptions& opts) {
  TargetCheck tc{emp.label, 0, -1.0};
  const auto n = emp.ccdf.sample_count;
  const double floor = std::max(opts.min_prob, opts.min_count / static_cast<double>(n));
  for (std::size_t k = 0; k < bound.grid.size() && k < emp.ccdf.probs.size(); ++k) {
    const double p = emp.ccdf.probs[k];
    const double excess = p - bound.probs[k];
    tc.max_excess = std::max(tc.max_excess, excess);
    if (p > floor && excess > opts.slack_sigmas * binomial_se(p, n)) ++tc.violations;
  }
  return tc;
}

namespace detail {

inline BoundCurve step_curve(std::span<const double> grid, double bound, std::string label) {
  BoundCurve c{std::vector<double>(grid.begin(), grid.end()), std::vector<double>(grid.size()), std::move(label), false};
  for (std::size_t k = 0; k < grid.size(); ++k) c.probs[k] = grid[k] < bound ? 1.0 : 0.0;
  return c;
}

inline std::string class_label(const char* metric, int class_id) {
  return std::string("sim_") + metric + "_class" + std::to_string(class_id);
}

}  // namespace detail

inline ComparisonResult run_comparison(const CaseConfig& config, const ComparisonOptions& opts = {}) {
  ComparisonResult res;
  res.config = config;
  res.stability = stability(config.classes);
  const auto grid = uniform_grid(config.tau_max_s, config.grid_points);
  const auto run = simulate(config.classes, config.customers, config.seed);
  res.customers = run.records.size();
  for (const auto& r : run.records) res.max_delay_s = std::max(res.max_delay_s, r.delay_s);

  for (const auto metric : {Metric::delay, Metric::waiting}) {
    const char* name = metric == Metric::delay ? "delay" : "waiting";
    const auto all = extract(run.records, metric);
    res.empirical.push_back({std::string("sim_") + name + "_all", empirical_ccdf(all, grid, config.warmup_fraction)});
    for (const auto& c : config.classes) {
      const auto vals = extract(run.records, metric, c.class_id);
      if (vals.empty()) continue;
      res.empirical.push_back({detail::class_label(name, c.class_id), empirical_ccdf(vals, grid, config.warmup_fraction)});
    }
  }
  if (config.replications > 0 && !config.all_periodic()) {
    for (const auto j : config.transient_indices) {
      res.empirical.push_back(
          {detail::class_label("delay", config.transient_class) + "_j" + std::to_string(j),
           transient_distribution(config, j, config.transient_class, config.replications, grid, opts.jobs)});
    }
  }

  auto check_targets = [&](BoundEntry& b, const std::vector<std::string>& targets) {
    for (const auto& t : targets) {
      if (const auto* e = res.find_empirical(t)) b.checks.push_back(check_curve(*e, b.curve, opts));
    }
  };
  std::vector<std::string> waiting_targets{"sim_waiting_all"};
  for (const auto& c : config.classes) waiting_targets.push_back(detail::class_label("waiting", c.class_id));

  auto deterministic = [&](BoundKind kind, std::optional<double> value, const std::string& label,
                           const std::string& note) {
    BoundEntry b;
    b.label = label;
    b.kind = kind;
    b.applicable = value.has_value();
    b.value_s = value;
    if (!value) {
      b.note = note;
      res.bounds.push_back(std::move(b));
      return;
    }
    b.curve = detail::step_curve(grid, *value, label);
    TargetCheck tc{"sim_delay_all", 0, -std::numeric_limits<double>::infinity()};
    for (const auto& r : run.records) {
      tc.max_excess = std::max(tc.max_excess, r.delay_s - *value);
      if (r.delay_s > *value + opts.deterministic_tolerance_s) ++tc.violations;
    }
    b.checks.push_back(tc);
    res.bounds.push_back(std::move(b));
  };

  auto exponential = [&](BoundKind kind, const ThetaSolution& theta, const std::string& label, bool approximate,
                         const std::string& note) {
    BoundEntry b;
    b.label = label + "_waiting";
    b.kind = kind;
    b.theta = theta;
    b.approximate = approximate;
    b.note = note;
    b.curve = waiting_bound_curve(theta, grid, 1.0, b.label);
    check_targets(b, waiting_targets);
    res.bounds.push_back(b);
    if (approximate) return;
    for (const auto& c : config.classes) {
      BoundEntry d;
      d.label = label + "_delay_class" + std::to_string(c.class_id);
      d.kind = kind;
      d.theta = theta;
      d.note = note;
      d.curve = delay_bound_convolve(service_distribution(c), b.curve);
      d.curve.label = d.label;
      check_targets(d, {detail::class_label("delay", c.class_id)});
      res.bounds.push_back(std::move(d));
    }
  };

  auto not_applicable = [&](BoundKind kind, const std::string& label, const std::string& why) {
    BoundEntry b;
    b.label = label;
    b.kind = kind;
    b.applicable = false;
    b.note = why;
    res.bounds.push_back(std::move(b));
  };

  const bool coupled = config.has_coupling();
  const std::string independence_note = coupled ? "assumes independent classes; arrivals are coupled" : "";
  for (const auto kind : config.bounds) {
    try {
      switch (kind) {
        case BoundKind::theorem1:
        case BoundKind::cruz: {
          std::vector<DeterministicEnvelope> env;
          std::vector<double> rates;
          for (const auto& c : config.classes) {
            env.push_back(deterministic_envelope(c));
            rates.push_back(c.service_rate_bps);
          }
          if (kind == BoundKind::theorem1) {
            std::optional<double> v;
            std::string note;
            try {
              v = bound_dd1(env, rates);
            } catch (const Error& e) {
              note = e.what();
            }
            deterministic(kind, v, "theorem1_delay", note);
          } else {
            deterministic(kind, bound_cruz_aggregate(env, rates), "cruz_delay", "sum r_n > min C_n");
          }
          break;
        }
        case BoundKind::md1_exact:
          exponential(kind, theta_md1(config.classes).exact, "md1_exact", coupled, independence_note);
          break;
        case BoundKind::md1_approx:
          exponential(kind, theta_md1(config.classes).approx, "md1_approx", true, independence_note);
          break;
        case BoundKind::mm1_exact:
          exponential(kind, theta_mm1(config.classes).exact, "mm1_exact", coupled, independence_note);
          break;
        case BoundKind::mm1_approx:
          exponential(kind, theta_mm1(config.classes).approx, "mm1_approx", true, independence_note);
          break;
        case BoundKind::compound:
          exponential(kind, theta_compound_poisson(config.classes), "compound_exact", coupled, independence_note);
          break;
        case BoundKind::mstar_d1: {
          BoundEntry b;
          b.label = "mstar_d1_waiting";
          b.kind = kind;
          b.approximate = true;
          b.theta = theta_md1(config.classes).approx;
          b.curve = bound_mstar_d1(config.classes, grid);
          b.note = "valid under any dependence; Taylor-approximate decay rate";
          check_targets(b, waiting_targets);
          res.bounds.push_back(std::move(b));
          break;
        }
        case BoundKind::dmdm: {
          const auto sol = dmdm_theta(config.classes);
          for (const auto& c : config.classes) {
            BoundEntry b;
            b.label = "dmdm_waiting_class" + std::to_string(c.class_id);
            b.kind = kind;
            b.theta = sol.theta;
            b.curve = bound_dmdm(config.classes, grid, c.class_id);
            check_targets(b, {detail::class_label("waiting", c.class_id)});
            res.bounds.push_back(std::move(b));
          }
          break;
        }
      }
    } catch (const Error& e) {
      not_applicable(kind, to_string(kind), e.what());
    }
  }
  return res;
}

// curve_label,tau_s,prob: every empirical curve, then every applicable bound curve.
inline void write_comparison_csv(std::ostream& os, const ComparisonResult& res) {
  os << "curve_label,tau_s,prob\n";
  os.precision(17);
  for (const auto& e : res.empirical) {
    for (std::size_t k = 0; k < e.ccdf.grid.size(); ++k) {
      os << e.label << ',' << e.ccdf.grid[k] << ',' << e.ccdf.probs[k] << '\n';
    }
  }
  for (const auto& b : res.bounds) {
    if (!b.applicable) continue;
    for (std::size_t k = 0; k < b.curve.grid.size(); ++k) {
      os << b.label << ',' << b.curve.grid[k] << ',' << b.curve.probs[k] << '\n';
    }
  }
}

}  // namespace mcfifo
