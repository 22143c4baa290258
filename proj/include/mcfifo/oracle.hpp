#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <tuple>
#include <vector>

#include "mcfifo/error.hpp"
#include "mcfifo/random.hpp"
#include "mcfifo/simulator.hpp"
#include "mcfifo/traffic.hpp"

// Brute-force validators. Deliberately independent of the simulator's merge
// and recursion: everything here is recomputed from the raw per-class
// sequences by scanning windows.
namespace mcfifo::oracle {

struct WindowScanResult {
  double supremum = 0.0;
  double window_start = 0.0;  // a maximizing s
};

// Events of all classes sorted by (time, class id, per-class index), carrying
// their work l / C_n.
class WindowScanner {
 public:
  WindowScanner(std::span<const ArrivalSequence> sequences, const RateTable& rates) {
    for (const auto& seq : sequences) {
      const double c = rates.at(seq.class_id);
      for (std::size_t i = 0; i < seq.events.size(); ++i) {
        events_.push_back({seq.events[i].time_s, seq.class_id, i + 1, seq.events[i].size_bits / c});
      }
    }
    std::sort(events_.begin(), events_.end(), [](const Event& a, const Event& b) {
      return std::tie(a.time, a.class_id, a.j) < std::tie(b.time, b.class_id, b.j);
    });
  }

  // V(t) = sup_{0<=s<=t} [ sum_n A_n(s, t) / C_n - (t - s) ], arrivals at t excluded.
  WindowScanResult virtual_wait(double t) const {
    const auto end = std::lower_bound(events_.begin(), events_.end(), t,
                                      [](const Event& e, double x) { return e.time < x; });
    return scan(static_cast<std::size_t>(end - events_.begin()), t);
  }

  // sup_{0<=s<=a} [ sum_n A_n(s, a+) / C_n - (a - s) ] for the customer
  // (class_id, j): arrivals at a count up to and including that customer.
  WindowScanResult inclusive_wait(int class_id, std::size_t j) const {
    const auto it = std::find_if(events_.begin(), events_.end(),
                                 [&](const Event& e) { return e.class_id == class_id && e.j == j; });
    if (it == events_.end()) throw Error(ErrorKind::invalid_input, "customer not found in sequences");
    return scan(static_cast<std::size_t>(it - events_.begin()) + 1, it->time);
  }

 private:
  struct Event {
    double time;
    int class_id;
    std::size_t j;
    double work;
  };

  // Candidate window starts are the arrival instants in events_[0, end) and t
  // itself; between arrivals the objective grows with s.
  WindowScanResult scan(std::size_t end, double t) const {
    WindowScanResult best{0.0, t};
    double work = 0.0;
    for (std::size_t i = end; i-- > 0;) {
      work += events_[i].work;
      const double v = work - (t - events_[i].time);
      if (v > best.supremum) best = {v, events_[i].time};
    }
    return best;
  }

  std::vector<Event> events_;
};

inline WindowScanResult virtual_wait_direct(std::span<const ArrivalSequence> sequences, const RateTable& rates,
                                            double t) {
  if (!(t >= 0.0)) throw Error(ErrorKind::invalid_input, "t must be >= 0");
  return WindowScanner(sequences, rates).virtual_wait(t);
}

// Right-hand side of the busy-period inequality
// D^j <= sup_s [ sum_n A_n(s, a^j_+) / C_n - (a^j - s) ].
inline double samplepath_delay_bound(std::span<const ArrivalSequence> sequences, const RateTable& rates,
                                     const CustomerRecord& record) {
  return WindowScanner(sequences, rates).inclusive_wait(record.class_id, record.j).supremum;
}

struct MgfEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
  // theta at or beyond an exponential class's mu: the true MGF is infinite.
  bool unreliable = false;
};

// Sample mean of exp(theta (sum_n A_n(w)/C_n - w)) over independent windows of
// length w starting at 0. For Poisson inputs the root of E[...] = 1 does not
// depend on w, so short windows give the same condition with far smaller
// estimator variance than w = 1 s.
inline MgfEstimate mgf_monte_carlo(std::span<const ClassSpec> specs, double theta, std::size_t samples,
                                   std::uint64_t seed, double window_s = 1.0) {
  if (samples < 10'000) throw Error(ErrorKind::invalid_input, "need at least 10^4 samples");
  if (!(window_s > 0.0)) throw Error(ErrorKind::invalid_input, "window must be > 0");
  MgfEstimate est;
  est.samples = samples;
  for (const auto& s : specs) {
    s.validate();
    if (!s.has_constant_size() && theta >= s.service_rate()) est.unreliable = true;
  }
  if (theta == 0.0) {
    est.mean = 1.0;
    return est;
  }

  // Coupled classes share one unit-rate Poisson process; class n counts its
  // points in [0, lambda_n w).
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t n = 0; n < specs.size(); ++n) {
    if (const auto* c = std::get_if<CoupledPoisson>(&specs[n].arrival)) groups[c->coupling_group].push_back(n);
  }
  for (auto& [g, members] : groups) {
    std::sort(members.begin(), members.end(),
              [&](std::size_t a, std::size_t b) { return specs[a].arrival_rate() < specs[b].arrival_rate(); });
  }

  rng::Stream stream(rng::derive(seed, rng::Domain::replication, 0x6d67ULL));
  auto& eng = stream.engine();
  std::vector<long long> counts(specs.size());
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    for (std::size_t n = 0; n < specs.size(); ++n) {
      const auto& s = specs[n];
      if (const auto* p = std::get_if<Periodic>(&s.arrival)) {
        const double phase = stream.open_uniform() * p->period_s;
        counts[n] = window_s > phase ? static_cast<long long>(std::ceil((window_s - phase) / p->period_s)) : 0;
      } else if (std::holds_alternative<Poisson>(s.arrival)) {
        counts[n] = std::poisson_distribution<long long>(s.arrival_rate() * window_s)(eng);
      }
    }
    for (const auto& [g, members] : groups) {
      long long cumulative = 0;
      double prev = 0.0;
      for (const auto n : members) {
        const double mean = (specs[n].arrival_rate() - prev) * window_s;
        if (mean > 0.0) cumulative += std::poisson_distribution<long long>(mean)(eng);
        counts[n] = cumulative;
        prev = specs[n].arrival_rate();
      }
    }
    double work = 0.0;
    for (std::size_t n = 0; n < specs.size(); ++n) {
      const auto& s = specs[n];
      if (counts[n] == 0) continue;
      const double y = s.mean_service_time();
      if (s.has_constant_size()) {
        work += static_cast<double>(counts[n]) * y;
      } else {
        work += std::gamma_distribution<double>(static_cast<double>(counts[n]), y)(eng);
      }
    }
    const double v = std::exp(theta * (work - window_s));
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(samples);
  est.mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * est.mean * est.mean) / (n - 1.0));
  est.std_error = std::sqrt(var / n);
  return est;
}

}  // namespace mcfifo::oracle
