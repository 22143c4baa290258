#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mcfifo/analytic.hpp"
#include "mcfifo/config.hpp"
#include "mcfifo/error.hpp"
#include "mcfifo/experiments.hpp"
#include "mcfifo/simulator.hpp"
#include "mcfifo/traffic.hpp"

namespace mcfifo::cli {

using nlohmann::json;

enum ExitCode : int { kOk = 0, kConfigError = 2, kViolation = 3 };

struct CliConfig {
  std::string command;
  std::optional<int> case_id;
  std::optional<std::string> config_path;
  std::optional<std::size_t> customers;
  std::optional<std::size_t> replications;
  std::optional<std::uint64_t> seed;
  std::optional<double> tau_max_s;
  std::optional<std::size_t> grid_points;
  std::optional<double> warmup;
  std::string out_dir;
  std::string format = "json";
  unsigned jobs = 1;
};

namespace detail {

inline double number(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw Error(ErrorKind::invalid_spec, std::string("missing numeric field '") + key + "'");
  }
  return j.at(key).get<double>();
}

inline ClassSpec parse_class(const json& j, int fallback_id) {
  ClassSpec c;
  c.class_id = j.value("class_id", fallback_id);
  const auto arrival = j.value("arrival", std::string{});
  if (arrival == "periodic") {
    Periodic p{number(j, "period_ms") * 1e-3, std::nullopt};
    if (j.contains("phase_ms")) p.phase_s = number(j, "phase_ms") * 1e-3;
    c.arrival = p;
  } else if (arrival == "poisson") {
    const double rate = number(j, "rate_per_s");
    if (j.contains("coupling_group")) {
      c.arrival = CoupledPoisson{rate, j.at("coupling_group").get<int>()};
    } else {
      c.arrival = Poisson{rate};
    }
  } else {
    throw Error(ErrorKind::invalid_spec, "arrival must be 'periodic' or 'poisson'");
  }
  const auto size = j.value("size", std::string("constant"));
  if (size == "constant") {
    c.size = ConstantSize{number(j, "packet_bytes") * 8.0};
  } else if (size == "exponential") {
    c.size = ExponentialSize{number(j, "mean_packet_bytes") * 8.0};
  } else {
    throw Error(ErrorKind::invalid_spec, "size must be 'constant' or 'exponential'");
  }
  c.service_rate_bps = number(j, "service_rate_mbps") * 1e6;
  c.validate();
  return c;
}

}  // namespace detail

// Config file: JSON with explicit units in field names, canonicalized to
// seconds and bits here.
inline CaseConfig parse_config(const json& j) {
  CaseConfig cfg;
  cfg.name = j.value("name", std::string("custom"));
  if (!j.contains("classes") || !j.at("classes").is_array() || j.at("classes").empty()) {
    throw Error(ErrorKind::invalid_spec, "config needs a non-empty 'classes' array");
  }
  int id = 1;
  for (const auto& c : j.at("classes")) cfg.classes.push_back(detail::parse_class(c, id++));
  cfg.customers = j.value("customers", cfg.customers);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("tau_max_ms")) cfg.tau_max_s = detail::number(j, "tau_max_ms") * 1e-3;
  cfg.grid_points = j.value("grid_points", cfg.grid_points);
  cfg.warmup_fraction = j.value("warmup", cfg.warmup_fraction);
  cfg.replications = j.value("replications", cfg.replications);
  cfg.bounds = detect_bounds(cfg.classes);
  return cfg;
}

inline CaseConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::invalid_input, "cannot read config " + path);
  try {
    return parse_config(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::invalid_input, std::string("bad config JSON: ") + e.what());
  }
}

inline CaseConfig resolve(const CliConfig& opt) {
  if (opt.case_id.has_value() == opt.config_path.has_value()) {
    throw Error(ErrorKind::invalid_input, "give exactly one of --case or --config");
  }
  CaseConfig cfg = opt.case_id ? preset(*opt.case_id) : load_config(*opt.config_path);
  if (const char* env = std::getenv("MCFIFO_SEED"); env != nullptr && !opt.seed) {
    try {
      cfg.seed = std::stoull(env);
    } catch (const std::exception&) {
      throw Error(ErrorKind::invalid_input, "MCFIFO_SEED is not an unsigned integer");
    }
  }
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.customers) cfg.customers = *opt.customers;
  if (opt.replications) cfg.replications = *opt.replications;
  if (opt.tau_max_s) cfg.tau_max_s = *opt.tau_max_s;
  if (opt.grid_points) cfg.grid_points = *opt.grid_points;
  if (opt.warmup) cfg.warmup_fraction = *opt.warmup;
  if (cfg.customers == 0) throw Error(ErrorKind::invalid_input, "--customers must be >= 1");
  return cfg;
}

inline json to_json(const ThetaSolution& t) {
  json j{{"theta_star", t.theta_star}, {"method", to_string(t.method)}, {"residual", t.residual}};
  if (t.method == ThetaSolution::Method::exact_root) j["bracket"] = {t.bracket_lo, t.bracket_hi};
  return j;
}

inline json to_json(const StabilityReport& s) {
  return {{"rho", s.rho}, {"theorem1_condition", s.theorem1_condition}, {"cruz_condition", s.cruz_condition}};
}

inline json curve_json(const BoundCurve& c) {
  return {{"label", c.label}, {"approximate", c.approximate}, {"tau_s", c.grid}, {"prob", c.probs}};
}

struct AnalyticSummary {
  json doc;
  std::vector<BoundCurve> curves;
};

// Every analytic quantity the config admits, without simulating.
inline AnalyticSummary analytic_summary(const CaseConfig& cfg) {
  AnalyticSummary out;
  json& j = out.doc;
  j["case"] = cfg.case_id;
  j["name"] = cfg.name;
  j["stability"] = to_json(stability(cfg.classes));
  j["dd1_bound_s"] = "N.A.";
  j["cruz_bound_s"] = "N.A.";
  j["theta_star"] = "N.A.";
  j["bounds"] = json::array();
  const auto grid = uniform_grid(cfg.tau_max_s, cfg.grid_points);

  auto entry = [&](const std::string& label, bool applicable, bool approximate, const std::string& note) -> json& {
    j["bounds"].push_back({{"label", label}, {"applicable", applicable}, {"approximate", approximate}});
    if (!note.empty()) j["bounds"].back()["note"] = note;
    return j["bounds"].back();
  };
  const bool coupled = cfg.has_coupling();

  for (const auto kind : cfg.bounds) {
    try {
      switch (kind) {
        case BoundKind::theorem1:
        case BoundKind::cruz: {
          std::vector<DeterministicEnvelope> env;
          std::vector<double> rates;
          for (const auto& c : cfg.classes) {
            env.push_back(deterministic_envelope(c));
            rates.push_back(c.service_rate_bps);
          }
          if (kind == BoundKind::theorem1) {
            const double v = bound_dd1(env, rates);
            j["dd1_bound_s"] = v;
            entry("theorem1_delay", true, false, "")["value_s"] = v;
          } else if (const auto v = bound_cruz_aggregate(env, rates)) {
            j["cruz_bound_s"] = *v;
            entry("cruz_delay", true, false, "")["value_s"] = *v;
          } else {
            entry("cruz_delay", false, false, "sum r_n > min C_n");
          }
          break;
        }
        case BoundKind::md1_exact:
        case BoundKind::md1_approx:
        case BoundKind::mm1_exact:
        case BoundKind::mm1_approx:
        case BoundKind::compound: {
          const bool md1 = kind == BoundKind::md1_exact || kind == BoundKind::md1_approx;
          const bool approx = kind == BoundKind::md1_approx || kind == BoundKind::mm1_approx;
          ThetaSolution theta;
          if (kind == BoundKind::compound) {
            theta = theta_compound_poisson(cfg.classes);
          } else {
            const auto pair = md1 ? theta_md1(cfg.classes) : theta_mm1(cfg.classes);
            theta = approx ? pair.approx : pair.exact;
          }
          const std::string label = to_string(kind);
          const bool approximate = approx || coupled;
          auto& e = entry(label + "_waiting", true, approximate, coupled ? "assumes independent classes" : "");
          e["theta"] = to_json(theta);
          if (!approx && !coupled) j["theta_star"] = theta.theta_star;
          auto curve = waiting_bound_curve(theta, grid, 1.0, label + "_waiting");
          curve.approximate = approximate;
          out.curves.push_back(curve);
          if (!approx) {
            for (const auto& c : cfg.classes) {
              auto d = delay_bound_convolve(service_distribution(c), curve);
              d.label = label + "_delay_class" + std::to_string(c.class_id);
              out.curves.push_back(std::move(d));
            }
          }
          break;
        }
        case BoundKind::mstar_d1: {
          auto& e = entry("mstar_d1_waiting", true, true, "any dependence; Taylor-approximate decay rate");
          e["theta"] = to_json(theta_md1(cfg.classes).approx);
          out.curves.push_back(bound_mstar_d1(cfg.classes, grid));
          break;
        }
        case BoundKind::dmdm: {
          const auto sol = dmdm_theta(cfg.classes);
          j["theta_star"] = sol.theta.theta_star;
          for (const auto& c : cfg.classes) {
            const std::string label = "dmdm_waiting_class" + std::to_string(c.class_id);
            entry(label, true, false, "")["theta"] = to_json(sol.theta);
            out.curves.push_back(bound_dmdm(cfg.classes, grid, c.class_id));
          }
          break;
        }
      }
    } catch (const Error& e) {
      entry(to_string(kind), false, false, e.what());
    }
  }
  return out;
}

inline void write_curves_csv(std::ostream& os, const std::vector<BoundCurve>& curves) {
  os << "curve_label,tau_s,prob\n";
  os.precision(17);
  for (const auto& c : curves) {
    for (std::size_t k = 0; k < c.grid.size(); ++k) os << c.label << ',' << c.grid[k] << ',' << c.probs[k] << '\n';
  }
}

namespace detail {

inline std::filesystem::path out_path(const CliConfig& opt, const std::string& file) {
  std::filesystem::path dir = opt.out_dir.empty() ? std::filesystem::path(".") : std::filesystem::path(opt.out_dir);
  std::filesystem::create_directories(dir);
  return dir / file;
}

inline std::ofstream open_out(const CliConfig& opt, const std::string& file) {
  const auto p = out_path(opt, file);
  std::ofstream os(p);
  if (!os) throw Error(ErrorKind::invalid_input, "cannot write " + p.string());
  return os;
}

}  // namespace detail

inline int cmd_bounds(const CliConfig& opt, std::ostream& out) {
  const auto cfg = resolve(opt);
  auto summary = analytic_summary(cfg);
  if (opt.format == "csv") {
    if (opt.out_dir.empty()) {
      write_curves_csv(out, summary.curves);
    } else {
      auto os = detail::open_out(opt, "bounds.csv");
      write_curves_csv(os, summary.curves);
    }
    return kOk;
  }
  summary.doc["curves"] = json::array();
  for (const auto& c : summary.curves) summary.doc["curves"].push_back(curve_json(c));
  if (opt.out_dir.empty()) {
    out << summary.doc.dump(2) << '\n';
  } else {
    detail::open_out(opt, "bounds.json") << summary.doc.dump(2) << '\n';
  }
  return kOk;
}

inline int cmd_simulate(const CliConfig& opt, std::ostream& out) {
  const auto cfg = resolve(opt);
  const auto run = simulate(cfg.classes, cfg.customers, cfg.seed);
  const auto grid = uniform_grid(cfg.tau_max_s, cfg.grid_points);
  {
    auto os = detail::open_out(opt, "records.csv");
    write_records_csv(os, run.records);
  }
  std::vector<BoundCurve> ccdfs;
  for (const auto& c : cfg.classes) {
    const auto e = empirical_ccdf(extract(run.records, Metric::delay, c.class_id), grid, cfg.warmup_fraction);
    ccdfs.push_back({e.grid, e.probs, "sim_delay_class" + std::to_string(c.class_id), false});
  }
  if (opt.format == "json") {
    json j = json::array();
    for (const auto& c : ccdfs) j.push_back(curve_json(c));
    detail::open_out(opt, "ccdf.json") << j.dump(2) << '\n';
  } else {
    auto os = detail::open_out(opt, "ccdf.csv");
    write_curves_csv(os, ccdfs);
  }
  double max_delay = 0.0;
  double sum_wait = 0.0;
  for (const auto& r : run.records) {
    max_delay = std::max(max_delay, r.delay_s);
    sum_wait += r.waiting_s;
  }
  std::ostringstream line;
  line.precision(12);
  line << "customers=" << run.records.size() << " max_delay_s=" << max_delay
       << " mean_waiting_s=" << sum_wait / static_cast<double>(run.records.size());
  out << line.str() << '\n';
  return kOk;
}

inline json summary_json(const ComparisonResult& res) {
  json j;
  j["case"] = res.config.case_id;
  j["name"] = res.config.name;
  j["seed"] = res.config.seed;
  j["customers"] = res.customers;
  j["max_delay_s"] = res.max_delay_s;
  j["stability"] = to_json(res.stability);
  j["bounds"] = json::array();
  for (const auto& b : res.bounds) {
    json e{{"label", b.label},
           {"kind", to_string(b.kind)},
           {"applicable", b.applicable},
           {"approximate", b.approximate},
           {"guaranteed", b.guaranteed()},
           {"violations", b.violations()}};
    e["value_s"] = b.value_s ? json(*b.value_s) : json(b.applicable ? json(nullptr) : json("N.A."));
    if (!b.applicable) e["value_s"] = "N.A.";
    if (b.theta) e["theta"] = to_json(*b.theta);
    if (!b.note.empty()) e["note"] = b.note;
    e["checks"] = json::array();
    for (const auto& c : b.checks) {
      e["checks"].push_back({{"empirical", c.empirical_label}, {"violations", c.violations}, {"max_excess", c.max_excess}});
    }
    j["bounds"].push_back(std::move(e));
  }
  j["guaranteed_violation"] = res.guaranteed_violation();
  return j;
}

inline int cmd_compare(const CliConfig& opt, std::ostream& out) {
  const auto cfg = resolve(opt);
  ComparisonOptions copts;
  copts.jobs = opt.jobs;
  const auto res = run_comparison(cfg, copts);
  const auto summary = summary_json(res);
  if (opt.format == "json") {
    json j = summary;
    j["curves"] = json::array();
    for (const auto& e : res.empirical) j["curves"].push_back(curve_json({e.ccdf.grid, e.ccdf.probs, e.label, false}));
    for (const auto& b : res.bounds) {
      if (b.applicable) j["curves"].push_back(curve_json(b.curve));
    }
    detail::open_out(opt, "comparison.json") << j.dump(2) << '\n';
  } else {
    auto os = detail::open_out(opt, "comparison.csv");
    write_comparison_csv(os, res);
  }
  detail::open_out(opt, "summary.json") << summary.dump(2) << '\n';
  for (const auto& b : res.bounds) {
    out << b.label << ": "
        << (!b.applicable ? "N.A." : (b.guaranteed() ? "guaranteed" : "approximate"))
        << " violations=" << b.violations() << '\n';
  }
  return res.guaranteed_violation() ? kViolation : kOk;
}

inline int cmd_preset_list(std::ostream& out) {
  for (int id = 1; id <= 6; ++id) out << describe(preset(id));
  return kOk;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Delay bounds and simulation for multiclass FIFO queues"};
  app.require_subcommand(1);
  CliConfig opt;

  auto add_common = [&](CLI::App* sub) {
    auto* c = sub->add_option("--case", opt.case_id, "preset case 1..6");
    auto* f = sub->add_option("--config", opt.config_path, "JSON config file");
    c->excludes(f);
    sub->add_option("--customers", opt.customers, "customers to simulate");
    sub->add_option("--replications", opt.replications, "replications for transient studies");
    sub->add_option("--seed", opt.seed, "RNG seed (fallback: MCFIFO_SEED)");
    sub->add_option("--tau-max", opt.tau_max_s, "grid upper end, seconds");
    sub->add_option("--grid-points", opt.grid_points, "grid points");
    sub->add_option("--warmup", opt.warmup, "fraction of customers discarded as warmup");
    sub->add_option("--out", opt.out_dir, "output directory");
    sub->add_option("--format", opt.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--jobs", opt.jobs, "parallel replications")->check(CLI::PositiveNumber);
  };
  auto* bounds = app.add_subcommand("bounds", "analytic bounds as JSON");
  auto* simulate_cmd = app.add_subcommand("simulate", "simulate and write records and CCDFs");
  auto* compare = app.add_subcommand("compare", "simulate and compare against every applicable bound");
  auto* list = app.add_subcommand("preset-list", "list the preset cases");
  add_common(bounds);
  add_common(simulate_cmd);
  add_common(compare);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }
  if (simulate_cmd->parsed() || compare->parsed()) {
    if (!simulate_cmd->get_option("--format")->count() && !compare->get_option("--format")->count()) {
      opt.format = "csv";
    }
  }
  try {
    if (bounds->parsed()) return cmd_bounds(opt, out);
    if (simulate_cmd->parsed()) return cmd_simulate(opt, out);
    if (compare->parsed()) return cmd_compare(opt, out);
    if (list->parsed()) return cmd_preset_list(out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
  return kConfigError;
}

}  // namespace mcfifo::cli
