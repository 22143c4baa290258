#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mcfifo::rng {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Substream domains. A substream is fully determined by (seed, domain, index),
// so per-class streams never depend on how many other classes exist.
enum class Domain : std::uint64_t {
  interarrival = 1,
  size = 2,
  coupling_group = 3,
  replication = 4,
  phase = 5,
};

inline constexpr std::uint64_t derive(std::uint64_t seed, Domain domain, std::uint64_t index) {
  return splitmix64(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(domain))) + index);
}

// mt19937_64 has a standardized output sequence; the conversion to doubles is
// done here rather than through std::uniform_real_distribution so that
// sequences are bit-identical across standard library implementations.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}

  // Uniform on the open interval (0, 1).
  double open_uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Inverse transform: -ln(u) / rate.
  double exponential(double rate) { return -std::log(open_uniform()) / rate; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mcfifo::rng
