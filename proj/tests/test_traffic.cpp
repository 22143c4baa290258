#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "mcfifo/traffic.hpp"

using namespace mcfifo;

namespace {

ClassSpec periodic(double period_s, double bits, double c = 1e8, int id = 1) {
  return {id, Periodic{period_s, std::nullopt}, ConstantSize{bits}, c};
}

ClassSpec poisson(double rate, double bits, double c, int id = 1, bool exponential = false) {
  ClassSpec s{id, Poisson{rate}, ConstantSize{bits}, c};
  if (exponential) s.size = ExponentialSize{bits};
  return s;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::invalid_input;
}

std::vector<double> gaps(const ArrivalSequence& seq) {
  std::vector<double> g;
  double prev = 0.0;
  for (const auto& e : seq.events) {
    g.push_back(e.time_s - prev);
    prev = e.time_s;
  }
  return g;
}

}  // namespace

TEST(GenPeriodic, ShortSequence) {
  const auto seq = gen_periodic(periodic(0.1e-3, 800), 3);
  ASSERT_EQ(seq.events.size(), 3u);
  EXPECT_DOUBLE_EQ(seq.events[0].time_s, 0.1e-3);
  EXPECT_DOUBLE_EQ(seq.events[1].time_s, 0.2e-3);
  EXPECT_DOUBLE_EQ(seq.events[2].time_s, 0.3e-3);
  for (const auto& e : seq.events) EXPECT_EQ(e.size_bits, 800.0);
}

TEST(GenPeriodic, SingleArrivalAtOnePeriod) {
  const auto seq = gen_periodic(periodic(1.0, 1.0), 1);
  ASSERT_EQ(seq.events.size(), 1u);
  EXPECT_EQ(seq.events[0].time_s, 1.0);
}

TEST(GenPeriodic, ThousandthArrivalAtOneSecond) {
  const auto seq = gen_periodic(periodic(1e-3, 10000), 1000);
  EXPECT_EQ(seq.events.back().time_s, 1.0);
}

TEST(GenPeriodic, WrongKindRejected) {
  EXPECT_EQ(kind_of([] { gen_periodic(poisson(1.0, 1.0, 1.0), 3); }), ErrorKind::invalid_spec);
}

TEST(GenPeriodic, ZeroCountRejected) { EXPECT_THROW(gen_periodic(periodic(1.0, 1.0), 0), Error); }

TEST(GenPoisson, MeanInterarrival) {
  const auto seq = gen_poisson(poisson(1e4, 800, 1e7), 1'000'000, 3);
  const auto g = gaps(seq);
  const double mean = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());
  EXPECT_NEAR(mean, 1e-4, 0.01 * 1e-4);
}

TEST(GenPoisson, Deterministic) {
  const auto a = gen_poisson(poisson(1.0, 1.0, 1.0), 1, 5);
  const auto b = gen_poisson(poisson(1.0, 1.0, 1.0), 1, 5);
  EXPECT_EQ(a.events[0].time_s, b.events[0].time_s);
}

TEST(GenPoisson, ExponentialSizeMean) {
  const auto seq = gen_poisson(poisson(1000, 10000, 1e8, 1, true), 1'000'000, 11);
  double sum = 0.0;
  for (const auto& e : seq.events) sum += e.size_bits;
  EXPECT_NEAR(sum / 1e6, 10000.0, 100.0);
}

TEST(GenPoisson, PrefixStable) {
  const auto shortseq = gen_poisson(poisson(50, 1, 100, 1, true), 100, 8);
  const auto longseq = gen_poisson(poisson(50, 1, 100, 1, true), 1000, 8);
  for (std::size_t i = 0; i < shortseq.events.size(); ++i) {
    ASSERT_EQ(shortseq.events[i].time_s, longseq.events[i].time_s);
    ASSERT_EQ(shortseq.events[i].size_bits, longseq.events[i].size_bits);
  }
}

TEST(GenPoisson, DifferentSeedsDiffer) {
  const auto a = gen_poisson(poisson(1.0, 1.0, 1.0), 10, 1);
  const auto b = gen_poisson(poisson(1.0, 1.0, 1.0), 10, 2);
  EXPECT_NE(a.events[0].time_s, b.events[0].time_s);
}

namespace {

std::vector<ClassSpec> coupled_pair(double l1, double l2) {
  return {{1, CoupledPoisson{l1, 1}, ConstantSize{800}, 1e7}, {2, CoupledPoisson{l2, 1}, ConstantSize{10000}, 1e8}};
}

}  // namespace

TEST(GenCoupled, EqualRatesGiveIdenticalTimes) {
  const auto specs = coupled_pair(500, 500);
  const auto seqs = gen_coupled_poisson(specs, 1000, 4);
  ASSERT_EQ(seqs.size(), 2u);
  for (std::size_t j = 0; j < 1000; ++j) ASSERT_EQ(seqs[0].events[j].time_s, seqs[1].events[j].time_s);
}

TEST(GenCoupled, InterarrivalsScaleElementwise) {
  const auto specs = coupled_pair(1e4, 1e3);
  const auto seqs = gen_coupled_poisson(specs, 10000, 4);
  const auto g1 = gaps(seqs[0]);
  const auto g2 = gaps(seqs[1]);
  // Gaps are recovered from cumulative times, so they carry rounding of the
  // order of eps times the arrival time itself.
  for (std::size_t j = 0; j < g1.size(); ++j) {
    ASSERT_NEAR(g2[j], 10.0 * g1[j], 1e-14 * seqs[1].events[j].time_s) << j;
    ASSERT_NEAR(seqs[1].events[j].time_s, 10.0 * seqs[0].events[j].time_s, 1e-12 * seqs[1].events[j].time_s);
  }
}

TEST(GenCoupled, LoneMemberRejected) {
  const std::vector<ClassSpec> one{{1, CoupledPoisson{10.0, 3}, ConstantSize{1.0}, 1.0}};
  EXPECT_EQ(kind_of([&] { gen_coupled_poisson(one, 10, 1); }), ErrorKind::invalid_spec);
}

TEST(GenCoupled, MarginalsMatchPoissonMoments) {
  // Exponential(lambda) gaps: mean 1/lambda, variance 1/lambda^2.
  const auto specs = coupled_pair(1e4, 1e3);
  const auto seqs = gen_coupled_poisson(specs, 1'000'000, 21);
  for (std::size_t n = 0; n < 2; ++n) {
    const double lambda = specs[n].arrival_rate();
    const auto g = gaps(seqs[n]);
    const double m = static_cast<double>(g.size());
    double s1 = 0.0;
    double s2 = 0.0;
    for (const double x : g) {
      s1 += x;
      s2 += x * x;
    }
    const double mean = s1 / m;
    const double var = s2 / m - mean * mean;
    // se of the sample mean is sigma/sqrt(m); se of the sample variance of an
    // exponential is sqrt((mu4 - sigma^4)/m) = sqrt(8) sigma^2 / sqrt(m).
    EXPECT_NEAR(mean, 1.0 / lambda, 3.0 / lambda / std::sqrt(m));
    EXPECT_NEAR(var, 1.0 / (lambda * lambda), 3.0 * std::sqrt(8.0) / (lambda * lambda) / std::sqrt(m));
  }
}

TEST(GenerateUntil, CoupledMatchesDirectGenerator) {
  const auto specs = coupled_pair(1e4, 1e3);
  const auto direct = gen_coupled_poisson(specs, 100, 9);
  const auto until = generate_until(specs, direct[1].events.back().time_s, 9);
  ASSERT_EQ(until[1].events.size(), 100u);
  for (std::size_t j = 0; j < 100; ++j) EXPECT_EQ(until[1].events[j].time_s, direct[1].events[j].time_s);
}

TEST(Envelope, PaperClasses) {
  const auto e1 = deterministic_envelope(periodic(0.1e-3, 800));
  EXPECT_DOUBLE_EQ(e1.rate_bps, 8e6);
  EXPECT_EQ(e1.burst_bits, 800.0);
  const auto e2 = deterministic_envelope(periodic(1e-3, 10000));
  EXPECT_DOUBLE_EQ(e2.rate_bps, 1e7);
  EXPECT_EQ(e2.burst_bits, 10000.0);
  const auto e3 = deterministic_envelope(periodic(1.0, 1.0));
  EXPECT_EQ(e3.rate_bps, 1.0);
  EXPECT_EQ(e3.burst_bits, 1.0);
}

TEST(Envelope, StochasticRejected) {
  EXPECT_EQ(kind_of([] { deterministic_envelope(poisson(1.0, 1.0, 1.0)); }), ErrorKind::unsupported_envelope);
}

TEST(Envelope, HoldsOnEveryWindow) {
  // Windows that matter start at an arrival and end at one (inclusive); the
  // phase variants shift the whole pattern.
  for (const std::optional<double> phase : {std::optional<double>{}, std::optional<double>{0.0},
                                            std::optional<double>{0.37e-3}}) {
    ClassSpec s{1, Periodic{1e-3, phase}, ConstantSize{10000}, 1e8};
    const auto env = deterministic_envelope(s);
    const auto seq = gen_periodic(s, 10000);
    const auto& ev = seq.events;
    double worst = -INFINITY;
    for (std::size_t i = 0; i < ev.size(); ++i) {
      double bits = 0.0;
      for (std::size_t k = i; k < ev.size(); ++k) {
        bits += ev[k].size_bits;
        worst = std::max(worst, bits - env.rate_bps * (ev[k].time_s - ev[i].time_s) - env.burst_bits);
      }
    }
    // Rounding in the arrival times is far below one bit.
    EXPECT_LE(worst, 1e-6);
  }
}

TEST(Traffic, CountsHalfOpenWindow) {
  const auto seq = gen_periodic(periodic(1.0, 5.0), 4);
  EXPECT_EQ(seq.traffic(1.0, 3.0), 10.0);
  EXPECT_EQ(seq.traffic(0.0, 1.0), 0.0);
  EXPECT_EQ(seq.traffic(0.0, 10.0), 20.0);
}

TEST(Traffic, CsvHeader) {
  std::vector<ArrivalSequence> seqs{gen_periodic(periodic(1.0, 8.0, 1.0, 3), 2)};
  std::ostringstream os;
  write_csv(os, seqs);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "class_id,arrival_time_s,size_bits");
  EXPECT_NE(os.str().find("3,2,8"), std::string::npos);
}

TEST(GsbbTail, PeriodicIsDegenerate) {
  const auto s = periodic(0.1e-3, 800, 1e7);
  const auto t = gsbb_tail_from_mgf(s, 8e6);
  EXPECT_EQ(t.form, GsbbTail::Form::degenerate);
  EXPECT_EQ(t.evaluate(799.999), 1.0);
  EXPECT_EQ(t.evaluate(800.0), 0.0);
  EXPECT_EQ(t.evaluate(1e9), 0.0);
}

TEST(GsbbTail, RateAtLoadHasNoDecay) {
  const auto s = poisson(1e4, 800, 1e7);
  EXPECT_EQ(kind_of([&] { gsbb_tail_from_mgf(s, s.load() * 1e7); }), ErrorKind::no_decay);
}

TEST(GsbbTail, ApproximateRateCaseThreeClassOne) {
  const auto s = poisson(1e4, 800, 1e7);
  const auto t = gsbb_tail_from_mgf(s, 0.832 * 1e7, TailMethod::approximate);
  EXPECT_EQ(t.form, GsbbTail::Form::exponential);
  EXPECT_NEAR(t.decay_per_bit * 1e7, 1000.0, 1e-8);
}

TEST(GsbbTail, ExactRateSatisfiesClassCondition) {
  const auto s = poisson(1e4, 800, 1e7);
  const double omega = 0.832;
  const auto t = gsbb_tail_from_mgf(s, omega * 1e7);
  const double theta = t.decay_per_bit * 1e7;
  const double y = 80e-6;
  EXPECT_NEAR(1e4 * std::expm1(theta * y) - theta * omega, 0.0, 1e-6);
  // Truncating the expansion overestimates the decay.
  EXPECT_LT(theta, 1000.0);
}

TEST(GsbbTail, ExponentialSizesStayInsideDomain) {
  const auto s = poisson(1000, 10000, 1e8, 2, true);  // mu = 1e4
  const auto t = gsbb_tail_from_mgf(s, 0.5 * 1e8);
  const double theta = t.decay_per_bit * 1e8;
  EXPECT_GT(theta, 0.0);
  EXPECT_LT(theta, 1e4);
  // lambda / (mu - theta) = omega at the root
  EXPECT_NEAR(1000.0 / (1e4 - theta), 0.5, 1e-9);
}

TEST(GsbbTail, PositiveDecayExactlyAboveLoad) {
  const auto s = poisson(1e4, 800, 1e7);
  for (const double omega : {0.5, 0.79, 0.8, 0.8000001, 0.81, 0.9, 1.0, 1.5}) {
    if (omega > s.load()) {
      const auto t = gsbb_tail_from_mgf(s, omega * 1e7);
      EXPECT_GT(t.decay_per_bit, 0.0) << omega;
    } else {
      EXPECT_THROW(gsbb_tail_from_mgf(s, omega * 1e7), Error) << omega;
    }
  }
}

TEST(ClassSpec, ValidateRejectsNonPositive) {
  EXPECT_THROW(periodic(0.0, 1.0).validate(), Error);
  EXPECT_THROW(periodic(1.0, 0.0).validate(), Error);
  EXPECT_THROW(poisson(-1.0, 1.0, 1.0).validate(), Error);
  EXPECT_THROW(periodic(1.0, 1.0, 0.0).validate(), Error);
}
