#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "mcfifo/decay_rate.hpp"
#include "mcfifo/error.hpp"
#include "mcfifo/random.hpp"

// Units: seconds and bits throughout. Conversions from ms/bytes/Mbps happen at
// the configuration boundary (see cli.hpp).
namespace mcfifo {

struct Periodic {
  double period_s;
  // First arrival time. Unset means one period after 0, so the system starts empty.
  std::optional<double> phase_s;
};

struct Poisson {
  double rate_per_s;
};

// Poisson arrivals whose interarrival uniforms are shared with every other
// class in the same coupling group.
struct CoupledPoisson {
  double rate_per_s;
  int coupling_group;
};

using ArrivalModel = std::variant<Periodic, Poisson, CoupledPoisson>;

struct ConstantSize {
  double bits;
};

struct ExponentialSize {
  double mean_bits;
};

using SizeModel = std::variant<ConstantSize, ExponentialSize>;

struct ClassSpec {
  int class_id = 1;
  ArrivalModel arrival = Periodic{1.0, std::nullopt};
  SizeModel size = ConstantSize{1.0};
  double service_rate_bps = 1.0;

  bool is_periodic() const { return std::holds_alternative<Periodic>(arrival); }
  bool is_poisson() const { return !is_periodic(); }
  bool is_coupled() const { return std::holds_alternative<CoupledPoisson>(arrival); }
  bool has_constant_size() const { return std::holds_alternative<ConstantSize>(size); }

  // lambda_n
  double arrival_rate() const {
    return std::visit(
        [](const auto& a) -> double {
          using T = std::decay_t<decltype(a)>;
          if constexpr (std::is_same_v<T, Periodic>) {
            return 1.0 / a.period_s;
          } else {
            return a.rate_per_s;
          }
        },
        arrival);
  }

  double mean_size_bits() const {
    return std::visit(
        [](const auto& s) -> double {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, ConstantSize>) {
            return s.bits;
          } else {
            return s.mean_bits;
          }
        },
        size);
  }

  // Y_n = E[l_n] / C_n
  double mean_service_time() const { return mean_size_bits() / service_rate_bps; }
  // mu_n
  double service_rate() const { return service_rate_bps / mean_size_bits(); }
  // r_n = lambda_n E[l_n], in bits per second.
  double traffic_rate_bps() const { return arrival_rate() * mean_size_bits(); }
  // rho_n = r_n / C_n
  double load() const { return traffic_rate_bps() / service_rate_bps; }

  void validate() const {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(service_rate_bps)) throw Error(ErrorKind::invalid_spec, "service rate must be > 0");
    if (!positive(mean_size_bits())) throw Error(ErrorKind::invalid_spec, "size must be > 0");
    if (const auto* p = std::get_if<Periodic>(&arrival)) {
      if (!positive(p->period_s)) throw Error(ErrorKind::invalid_spec, "period must be > 0");
      if (p->phase_s && !(std::isfinite(*p->phase_s) && *p->phase_s >= 0.0)) {
        throw Error(ErrorKind::invalid_spec, "phase must be >= 0");
      }
    } else if (!positive(arrival_rate())) {
      throw Error(ErrorKind::invalid_spec, "arrival rate must be > 0");
    }
  }
};

struct Arrival {
  double time_s;
  double size_bits;

  friend bool operator==(const Arrival&, const Arrival&) = default;
};

struct ArrivalSequence {
  int class_id = 0;
  std::vector<Arrival> events;

  // A(s, t): traffic arriving in [s, t).
  double traffic(double s, double t) const {
    double sum = 0.0;
    for (const auto& e : events) {
      if (e.time_s >= s && e.time_s < t) sum += e.size_bits;
    }
    return sum;
  }
};

inline void write_csv(std::ostream& os, std::span<const ArrivalSequence> sequences) {
  os << "class_id,arrival_time_s,size_bits\n";
  os.precision(17);
  for (const auto& seq : sequences) {
    for (const auto& e : seq.events) os << seq.class_id << ',' << e.time_s << ',' << e.size_bits << '\n';
  }
}

namespace detail {

// Prefix-stable per-class event source: the first k events never depend on how
// many events are eventually drawn.
class ClassSource {
 public:
  ClassSource(const ClassSpec& spec, std::uint64_t seed)
      : spec_(spec),
        interarrival_(interarrival_seed(spec, seed)),
        sizes_(rng::derive(seed, rng::Domain::size, static_cast<std::uint64_t>(spec.class_id))) {
    spec.validate();
  }

  Arrival next() {
    ++index_;
    double t = 0.0;
    if (const auto* p = std::get_if<Periodic>(&spec_.arrival)) {
      t = p->phase_s ? *p->phase_s + static_cast<double>(index_ - 1) * p->period_s
                     : static_cast<double>(index_) * p->period_s;
    } else {
      clock_ += interarrival_.exponential(spec_.arrival_rate());
      t = clock_;
    }
    double bits = 0.0;
    if (const auto* c = std::get_if<ConstantSize>(&spec_.size)) {
      bits = c->bits;
    } else {
      bits = sizes_.exponential(1.0 / std::get<ExponentialSize>(spec_.size).mean_bits);
    }
    return {t, bits};
  }

 private:
  static std::uint64_t interarrival_seed(const ClassSpec& spec, std::uint64_t seed) {
    if (const auto* c = std::get_if<CoupledPoisson>(&spec.arrival)) {
      return rng::derive(seed, rng::Domain::coupling_group, static_cast<std::uint64_t>(c->coupling_group));
    }
    return rng::derive(seed, rng::Domain::interarrival, static_cast<std::uint64_t>(spec.class_id));
  }

  ClassSpec spec_;
  rng::Stream interarrival_;
  rng::Stream sizes_;
  std::uint64_t index_ = 0;
  double clock_ = 0.0;
};

inline ArrivalSequence draw(const ClassSpec& spec, std::size_t count, std::uint64_t seed) {
  ClassSource source(spec, seed);
  ArrivalSequence seq{spec.class_id, {}};
  seq.events.reserve(count);
  for (std::size_t i = 0; i < count; ++i) seq.events.push_back(source.next());
  return seq;
}

inline void require_count(std::size_t count) {
  if (count < 1) throw Error(ErrorKind::invalid_spec, "count must be >= 1");
}

inline void check_coupling_groups(std::span<const ClassSpec> specs) {
  std::map<int, int> members;
  for (const auto& s : specs) {
    if (const auto* c = std::get_if<CoupledPoisson>(&s.arrival)) ++members[c->coupling_group];
  }
  for (const auto& [group, n] : members) {
    if (n < 2) {
      throw Error(ErrorKind::invalid_spec,
                  "coupling group " + std::to_string(group) + " has fewer than 2 classes");
    }
  }
}

}  // namespace detail

inline ArrivalSequence gen_periodic(const ClassSpec& spec, std::size_t count) {
  if (!spec.is_periodic()) throw Error(ErrorKind::invalid_spec, "gen_periodic needs a periodic class");
  detail::require_count(count);
  return detail::draw(spec, count, 0);
}

inline ArrivalSequence gen_poisson(const ClassSpec& spec, std::size_t count, std::uint64_t seed) {
  if (!std::holds_alternative<Poisson>(spec.arrival)) {
    throw Error(ErrorKind::invalid_spec, "gen_poisson needs an independent Poisson class");
  }
  detail::require_count(count);
  return detail::draw(spec, count, seed);
}

// Class n's j-th interarrival is -ln(u_j) / lambda_n with u_j shared across the
// group (comonotone coupling). Sizes keep their per-class streams.
inline std::vector<ArrivalSequence> gen_coupled_poisson(std::span<const ClassSpec> specs, std::size_t count,
                                                        std::uint64_t seed) {
  detail::require_count(count);
  if (specs.size() < 2) throw Error(ErrorKind::invalid_spec, "a coupling group needs at least 2 classes");
  const auto* first = std::get_if<CoupledPoisson>(&specs.front().arrival);
  if (first == nullptr) throw Error(ErrorKind::invalid_spec, "gen_coupled_poisson needs coupled classes");
  std::vector<ArrivalSequence> out;
  for (const auto& s : specs) {
    const auto* c = std::get_if<CoupledPoisson>(&s.arrival);
    if (c == nullptr || c->coupling_group != first->coupling_group) {
      throw Error(ErrorKind::invalid_spec, "all classes must share one coupling group");
    }
    out.push_back(detail::draw(s, count, seed));
  }
  return out;
}

// Every class of a configuration, each drawn until its arrivals pass the
// horizon (arrivals at times <= horizon are kept).
inline std::vector<ArrivalSequence> generate_until(std::span<const ClassSpec> specs, double horizon_s,
                                                   std::uint64_t seed) {
  detail::check_coupling_groups(specs);
  std::vector<ArrivalSequence> out;
  out.reserve(specs.size());
  for (const auto& s : specs) {
    detail::ClassSource source(s, seed);
    ArrivalSequence seq{s.class_id, {}};
    seq.events.reserve(static_cast<std::size_t>(std::max(0.0, horizon_s * s.arrival_rate() * 1.05)) + 16);
    for (;;) {
      const Arrival a = source.next();
      if (a.time_s > horizon_s) break;
      seq.events.push_back(a);
    }
    out.push_back(std::move(seq));
  }
  return out;
}

struct DeterministicEnvelope {
  double rate_bps = 0.0;
  double burst_bits = 0.0;
};

inline DeterministicEnvelope deterministic_envelope(const ClassSpec& spec) {
  spec.validate();
  if (!spec.is_periodic() || !spec.has_constant_size()) {
    throw Error(ErrorKind::unsupported_envelope, "deterministic envelope needs periodic arrivals of constant size");
  }
  const double l = std::get<ConstantSize>(spec.size).bits;
  return {l / std::get<Periodic>(spec.arrival).period_s, l};
}

// gSBB bound F(R, sigma) on P{ sup_s [A(s,t) - R (t-s)] > sigma }.
struct GsbbTail {
  enum class Form { exponential, degenerate };

  double reference_rate_bps = 0.0;
  Form form = Form::degenerate;
  double prefactor = 1.0;       // exponential form: M
  double decay_per_bit = 0.0;   // exponential form: eta
  double burst_bits = 0.0;      // degenerate form: zero tail from here on

  static GsbbTail exponential(double rate, double prefactor, double decay_per_bit) {
    return {rate, Form::exponential, prefactor, decay_per_bit, 0.0};
  }
  static GsbbTail degenerate(double rate, double burst_bits) {
    return {rate, Form::degenerate, 1.0, 0.0, burst_bits};
  }

  // Clamped to [0, 1]; negative sigma behaves as sigma = 0.
  double evaluate(double sigma_bits) const {
    const double x = std::max(0.0, sigma_bits);
    if (form == Form::degenerate) return x < burst_bits ? 1.0 : 0.0;
    return std::clamp(prefactor * std::exp(-decay_per_bit * x), 0.0, 1.0);
  }
};

enum class TailMethod { exact, approximate };

// Per-class gSBB tail from the class MGF condition
// E[exp(theta (A_n(1)/C_n - omega))] = 1 with omega = R / C_n. Periodic classes of
// constant size get the degenerate tail at sigma = l_n.
inline GsbbTail gsbb_tail_from_mgf(const ClassSpec& spec, double reference_rate_bps,
                                   TailMethod method = TailMethod::exact) {
  spec.validate();
  const double omega = reference_rate_bps / spec.service_rate_bps;
  if (spec.is_periodic()) {
    if (!spec.has_constant_size()) {
      throw Error(ErrorKind::unsupported_envelope, "periodic arrivals need constant sizes for a gSBB tail");
    }
    const auto env = deterministic_envelope(spec);
    if (reference_rate_bps < env.rate_bps) {
      throw Error(ErrorKind::no_decay, "reference rate below the class rate");
    }
    return GsbbTail::degenerate(reference_rate_bps, env.burst_bits);
  }
  const double lambda = spec.arrival_rate();
  const double y = spec.mean_service_time();
  const double rho = spec.load();
  if (!(omega > rho)) throw Error(ErrorKind::no_decay, "R / C_n must exceed rho_n");

  double theta = 0.0;
  if (method == TailMethod::approximate) {
    // Second-order expansion of the class condition; the exponential-size
    // variant loses the factor 2.
    theta = (spec.has_constant_size() ? 2.0 : 1.0) * (omega - rho) / (lambda * y * y);
  } else if (spec.has_constant_size()) {
    theta = roots::sup_feasible([&](double t) { return std::exp(lambda * std::expm1(t * y) - t * omega); })
                .value;
  } else {
    const double mu = 1.0 / y;
    theta = roots::sup_feasible([&](double t) { return t < mu ? std::exp(lambda * t / (mu - t) - t * omega)
                                                          : std::numeric_limits<double>::infinity();
                                           },
                                           mu)
                .value;
  }
  return GsbbTail::exponential(reference_rate_bps, 1.0, theta / spec.service_rate_bps);
}

}  // namespace mcfifo
