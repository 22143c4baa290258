#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <queue>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "mcfifo/config.hpp"
#include "mcfifo/error.hpp"
#include "mcfifo/random.hpp"
#include "mcfifo/traffic.hpp"

namespace mcfifo {

struct AggregateArrival {
  int class_id;
  std::size_t j;  // per-class index, 1-based
  double time_s;
  double size_bits;
};

// Stable k-way merge by arrival time; ties go to the lower class id, then the
// lower per-class index.
inline std::vector<AggregateArrival> merge_streams(std::span<const ArrivalSequence> sequences) {
  using Head = std::tuple<double, int, std::size_t, std::size_t>;  // time, class, j, sequence
  std::priority_queue<Head, std::vector<Head>, std::greater<>> heads;
  std::size_t total = 0;
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    const auto& ev = sequences[s].events;
    for (std::size_t i = 1; i < ev.size(); ++i) {
      if (ev[i].time_s < ev[i - 1].time_s) throw Error(ErrorKind::invalid_input, "sequence is not time-ordered");
    }
    total += ev.size();
    if (!ev.empty()) heads.emplace(ev[0].time_s, sequences[s].class_id, 1, s);
  }
  std::vector<AggregateArrival> out;
  out.reserve(total);
  while (!heads.empty()) {
    const auto [t, cls, j, s] = heads.top();
    heads.pop();
    const auto& ev = sequences[s].events;
    out.push_back({cls, j, t, ev[j - 1].size_bits});
    if (j < ev.size()) heads.emplace(ev[j].time_s, cls, j + 1, s);
  }
  return out;
}

struct CustomerRecord {
  int class_id = 0;
  std::size_t j = 0;      // per-class index, 1-based
  std::size_t index = 0;  // aggregate index, 1-based
  double arrival_s = 0.0;
  double departure_s = 0.0;
  double service_s = 0.0;
  double delay_s = 0.0;    // waiting + service
  double waiting_s = 0.0;  // service start - arrival, >= 0
};

// class_id -> C_n lookup for small nonnegative ids.
class RateTable {
 public:
  RateTable() = default;
  explicit RateTable(std::span<const ClassSpec> specs) {
    for (const auto& s : specs) set(s.class_id, s.service_rate_bps);
  }

  void set(int class_id, double rate_bps) {
    if (class_id < 0) throw Error(ErrorKind::invalid_input, "class ids must be >= 0");
    const auto idx = static_cast<std::size_t>(class_id);
    if (rates_.size() <= idx) rates_.resize(idx + 1, 0.0);
    rates_[idx] = rate_bps;
  }

  double at(int class_id) const {
    const auto idx = static_cast<std::size_t>(class_id);
    if (class_id < 0 || idx >= rates_.size() || !(rates_[idx] > 0.0)) {
      throw Error(ErrorKind::invalid_input, "no positive service rate for class " + std::to_string(class_id));
    }
    return rates_[idx];
  }

 private:
  std::vector<double> rates_;
};

// d^j = max(a^j, d^{j-1}) + l^j / C^j with d^0 = 0.
inline std::vector<CustomerRecord> run_fifo(std::span<const AggregateArrival> arrivals, const RateTable& rates) {
  std::vector<CustomerRecord> out;
  out.reserve(arrivals.size());
  double last_departure = 0.0;
  double last_arrival = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < arrivals.size(); ++i) {
    const auto& a = arrivals[i];
    if (a.time_s < last_arrival) throw Error(ErrorKind::invalid_input, "aggregate arrivals are not time-ordered");
    if (!(a.size_bits > 0.0)) throw Error(ErrorKind::invalid_input, "customer sizes must be > 0");
    last_arrival = a.time_s;
    const double service = a.size_bits / rates.at(a.class_id);
    const double start = std::max(a.time_s, last_departure);
    CustomerRecord r;
    r.class_id = a.class_id;
    r.j = a.j;
    r.index = i + 1;
    r.arrival_s = a.time_s;
    r.service_s = service;
    r.waiting_s = start - a.time_s;
    r.delay_s = r.waiting_s + service;
    r.departure_s = start + service;
    last_departure = r.departure_s;
    out.push_back(r);
  }
  return out;
}

inline void write_records_csv(std::ostream& os, std::span<const CustomerRecord> records) {
  os << "class_id,j,arrival_s,departure_s,delay_s,waiting_s\n";
  os.precision(17);
  for (const auto& r : records) {
    os << r.class_id << ',' << r.j << ',' << r.arrival_s << ',' << r.departure_s << ',' << r.delay_s << ','
       << r.waiting_s << '\n';
  }
}

struct EmpiricalCCDF {
  std::vector<double> grid;
  std::vector<double> probs;  // fraction of kept samples strictly above tau
  std::size_t sample_count = 0;
  std::size_t discarded = 0;
  // All replications identical (deterministic arrivals); the curve is a single sample path.
  bool degenerate = false;
};

inline double binomial_se(double p, std::size_t n) {
  return n == 0 ? 0.0 : std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(n));
}

// Discards the first floor(warmup_fraction * n) values, then counts values > tau.
inline EmpiricalCCDF empirical_ccdf(std::span<const double> values, std::span<const double> grid,
                                    double warmup_fraction = 0.1) {
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
    throw Error(ErrorKind::invalid_input, "warmup fraction must be in [0, 1)");
  }
  const auto discard = static_cast<std::size_t>(std::floor(warmup_fraction * static_cast<double>(values.size())));
  std::vector<double> kept(values.begin() + static_cast<std::ptrdiff_t>(discard), values.end());
  if (kept.empty()) throw Error(ErrorKind::invalid_input, "no samples left after warmup discard");
  std::sort(kept.begin(), kept.end());
  EmpiricalCCDF out{std::vector<double>(grid.begin(), grid.end()), std::vector<double>(grid.size()), kept.size(),
                    discard, false};
  const double n = static_cast<double>(kept.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto above = kept.end() - std::upper_bound(kept.begin(), kept.end(), grid[k]);
    out.probs[k] = static_cast<double>(above) / n;
  }
  return out;
}

enum class Metric { delay, waiting };

// Per-customer delays or waiting times in aggregate order, optionally for one class.
inline std::vector<double> extract(std::span<const CustomerRecord> records, Metric metric,
                                   std::optional<int> class_id = std::nullopt) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (class_id && r.class_id != *class_id) continue;
    out.push_back(metric == Metric::delay ? r.delay_s : r.waiting_s);
  }
  return out;
}

struct SimulationRun {
  std::vector<ArrivalSequence> sequences;  // restricted to the simulated customers
  std::vector<AggregateArrival> aggregate;
  std::vector<CustomerRecord> records;
};

namespace detail {

inline double total_arrival_rate(std::span<const ClassSpec> specs) {
  double sum = 0.0;
  for (const auto& s : specs) sum += s.arrival_rate();
  return sum;
}

inline double max_mean_gap(std::span<const ClassSpec> specs) {
  double gap = 0.0;
  for (const auto& s : specs) {
    gap = std::max(gap, 1.0 / s.arrival_rate());
    if (const auto* p = std::get_if<Periodic>(&s.arrival); p && p->phase_s) gap = std::max(gap, *p->phase_s);
  }
  return gap;
}

inline std::vector<ArrivalSequence> split_by_class(std::span<const ClassSpec> specs,
                                                   std::span<const AggregateArrival> aggregate) {
  std::vector<ArrivalSequence> out;
  for (const auto& s : specs) out.push_back({s.class_id, {}});
  for (const auto& a : aggregate) {
    for (auto& seq : out) {
      if (seq.class_id == a.class_id) {
        seq.events.push_back({a.time_s, a.size_bits});
        break;
      }
    }
  }
  return out;
}

}  // namespace detail

// The first `customers` customers of the aggregate stream, simulated.
inline SimulationRun simulate(std::span<const ClassSpec> specs, std::size_t customers, std::uint64_t seed) {
  if (specs.empty() || customers == 0) throw Error(ErrorKind::invalid_input, "nothing to simulate");
  double horizon = 1.1 * static_cast<double>(customers) / detail::total_arrival_rate(specs) +
                   10.0 * detail::max_mean_gap(specs);
  SimulationRun run;
  for (;;) {
    const auto sequences = generate_until(specs, horizon, seed);
    run.aggregate = merge_streams(sequences);
    if (run.aggregate.size() >= customers) break;
    horizon *= 2.0;
  }
  run.aggregate.resize(customers);
  run.sequences = detail::split_by_class(specs, run.aggregate);
  run.records = run_fifo(run.aggregate, RateTable(specs));
  return run;
}

// CCDF of D_n^j for a fixed per-class index j across independent replications,
// each started from an empty system with its own derived seed.
inline EmpiricalCCDF transient_distribution(const CaseConfig& config, std::size_t j, int class_id,
                                            std::size_t replications, std::span<const double> grid,
                                            unsigned jobs = 1) {
  if (replications < 1 || j < 1) throw Error(ErrorKind::invalid_input, "need j >= 1 and replications >= 1");
  const auto& target = config.spec_of(class_id);
  const RateTable rates(config.classes);
  std::vector<double> delays(replications);

  auto one = [&](std::size_t r) {
    const std::uint64_t seed = rng::derive(config.seed, rng::Domain::replication, r);
    double horizon = 2.0 * static_cast<double>(j + 1) / target.arrival_rate() + detail::max_mean_gap(config.classes);
    for (;;) {
      const auto seqs = generate_until(config.classes, horizon, seed);
      const auto it = std::find_if(seqs.begin(), seqs.end(), [&](const auto& s) { return s.class_id == class_id; });
      if (it->events.size() >= j) {
        const double cut = it->events[j - 1].time_s;
        auto agg = merge_streams(seqs);
        // Customers after the target cannot affect it under FIFO.
        std::size_t keep = 0;
        while (keep < agg.size() && agg[keep].time_s <= cut) ++keep;
        agg.resize(keep);
        const auto recs = run_fifo(agg, rates);
        for (const auto& rec : recs) {
          if (rec.class_id == class_id && rec.j == j) {
            delays[r] = rec.delay_s;
            return;
          }
        }
      }
      horizon *= 2.0;
    }
  };

  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(replications)));
  if (jobs == 1) {
    for (std::size_t r = 0; r < replications; ++r) one(r);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < jobs; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t r = t; r < replications; r += jobs) one(r);
      });
    }
  }
  auto out = empirical_ccdf(delays, grid, 0.0);
  out.degenerate = config.all_periodic() && replications > 1;
  return out;
}

}  // namespace mcfifo
