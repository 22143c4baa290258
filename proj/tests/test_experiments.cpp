#include <gtest/gtest.h>

#include <sstream>

#include "mcfifo/experiments.hpp"

using namespace mcfifo;

namespace {

const char* const kGolden[] = {
    "case1 D/D/1\n"
    "  class 1: periodic X=0.0001s size=800b C=20000000bps\n"
    "  class 2: periodic X=0.001s size=10000b C=100000000bps\n",
    "case2 D/D/1\n"
    "  class 1: periodic X=0.0001s size=800b C=10000000bps\n"
    "  class 2: periodic X=0.001s size=10000b C=100000000bps\n",
    "case3 M/D/1\n"
    "  class 1: poisson lambda=10000/s size=800b C=10000000bps\n"
    "  class 2: poisson lambda=1000/s size=10000b C=100000000bps\n",
    "case4 M/M/1\n"
    "  class 1: poisson lambda=10000/s size~exp(mean 800b) C=10000000bps\n"
    "  class 2: poisson lambda=1000/s size~exp(mean 10000b) C=100000000bps\n",
    "case5 M*/D/1\n"
    "  class 1: coupled-poisson lambda=10000/s group=1 size=800b C=10000000bps\n"
    "  class 2: coupled-poisson lambda=1000/s group=1 size=10000b C=100000000bps\n",
    "case6 DM/DM/1\n"
    "  class 1: periodic X=0.0001s size=800b C=10000000bps\n"
    "  class 2: poisson lambda=1000/s size~exp(mean 10000b) C=100000000bps\n",
};

std::pair<std::vector<DeterministicEnvelope>, std::vector<double>> envelopes_of(const CaseConfig& c) {
  std::vector<DeterministicEnvelope> e;
  std::vector<double> r;
  for (const auto& s : c.classes) {
    e.push_back(deterministic_envelope(s));
    r.push_back(s.service_rate_bps);
  }
  return {e, r};
}

double max_delay(const CaseConfig& cfg) {
  const auto run = simulate(cfg.classes, cfg.customers, cfg.seed);
  double worst = 0.0;
  for (const auto& r : run.records) worst = std::max(worst, r.delay_s);
  return worst;
}

}  // namespace

TEST(Preset, GoldenParameters) {
  for (int id = 1; id <= 6; ++id) EXPECT_EQ(describe(preset(id)), kGolden[id - 1]) << id;
}

TEST(Preset, Examples) {
  const auto p1 = preset(1);
  EXPECT_EQ(p1.classes[0].service_rate_bps, 20e6);
  EXPECT_EQ(p1.classes[1].service_rate_bps, 100e6);
  EXPECT_NEAR(stability(preset(2).classes).rho, 0.9, 1e-15);
  const auto p6 = preset(6);
  EXPECT_EQ(std::get<Periodic>(p6.classes[0].arrival).period_s, 0.1e-3);
  EXPECT_EQ(p6.classes[1].arrival_rate(), 1000.0);
}

TEST(Preset, Defaults) {
  for (int id = 1; id <= 6; ++id) {
    const auto p = preset(id);
    EXPECT_EQ(p.case_id, id);
    EXPECT_EQ(p.customers, 1'000'000u);
    EXPECT_EQ(p.warmup_fraction, 0.1);
    EXPECT_EQ(p.grid_points, 2000u);
    EXPECT_FALSE(p.bounds.empty());
  }
  EXPECT_EQ(preset(3).replications, 10'000u);
}

TEST(Preset, UnknownIdRejected) {
  for (const int id : {0, 7, -1}) {
    try {
      preset(id);
      FAIL() << id;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::unknown_case);
    }
  }
}

TEST(Preset, DetectedBoundsMatchPresets) {
  // Detection may add curves (the any-dependence M/D curve also holds for
  // independent classes); every preset curve must be among them.
  for (int id = 1; id <= 6; ++id) {
    const auto detected = detect_bounds(preset(id).classes);
    for (const auto k : preset(id).bounds) {
      EXPECT_NE(std::find(detected.begin(), detected.end(), k), detected.end()) << id << " " << to_string(k);
    }
  }
}

TEST(Tightness, CaseOneAndTwoEnvelopes) {
  for (const auto& [id, bound] : {std::pair{1, 140e-6}, std::pair{2, 180e-6}}) {
    const auto [e, r] = envelopes_of(preset(id));
    EXPECT_NEAR(max_delay(tightness_scenario(e, r)), bound, 1e-9) << id;
  }
}

TEST(Tightness, SingleClass) {
  const std::vector<DeterministicEnvelope> e{{1e6, 5000.0}};
  const std::vector<double> r{4e6};
  EXPECT_NEAR(max_delay(tightness_scenario(e, r)), 5000.0 / 4e6, 1e-12);
}

TEST(Tightness, RejectsEmptyBurst) {
  const std::vector<DeterministicEnvelope> e{{1e6, 0.0}};
  const std::vector<double> r{4e6};
  EXPECT_THROW(tightness_scenario(e, r), Error);
}

namespace {

ComparisonResult compare_small(int id, std::size_t customers, std::size_t replications = 0) {
  auto cfg = preset(id);
  cfg.customers = customers;
  cfg.replications = replications;
  return run_comparison(cfg);
}

}  // namespace

TEST(Comparison, CaseOne) {
  const auto res = compare_small(1, 100'000);
  const auto* t1 = res.find_bound("theorem1_delay");
  const auto* cruz = res.find_bound("cruz_delay");
  ASSERT_NE(t1, nullptr);
  ASSERT_NE(cruz, nullptr);
  EXPECT_NEAR(*t1->value_s, 140e-6, 1e-18);
  EXPECT_NEAR(*cruz->value_s, 540e-6, 1e-18);
  EXPECT_EQ(t1->violations(), 0u);
  EXPECT_TRUE(t1->guaranteed());
  EXPECT_LE(res.max_delay_s, 140e-6 + 1e-12);
  EXPECT_FALSE(res.guaranteed_violation());
}

TEST(Comparison, CaseTwoCruzNotApplicable) {
  const auto res = compare_small(2, 20'000);
  const auto* cruz = res.find_bound("cruz_delay");
  ASSERT_NE(cruz, nullptr);
  EXPECT_FALSE(cruz->applicable);
  EXPECT_FALSE(cruz->value_s.has_value());
  EXPECT_FALSE(cruz->note.empty());
  EXPECT_EQ(res.find_bound("theorem1_delay")->violations(), 0u);
}

TEST(Comparison, CaseThreeCurvesAndFlags) {
  const auto res = compare_small(3, 200'000, 300);
  ASSERT_NE(res.find_empirical("sim_waiting_all"), nullptr);
  ASSERT_NE(res.find_empirical("sim_delay_class2"), nullptr);
  ASSERT_NE(res.find_empirical("sim_delay_class1_j100"), nullptr);
  const auto* exact = res.find_bound("md1_exact_waiting");
  const auto* approx = res.find_bound("md1_approx_waiting");
  ASSERT_NE(exact, nullptr);
  ASSERT_NE(approx, nullptr);
  EXPECT_TRUE(exact->guaranteed());
  EXPECT_FALSE(approx->guaranteed());
  ASSERT_NE(res.find_bound("md1_exact_delay_class1"), nullptr);
  EXPECT_TRUE(exact->curve.well_formed());
}

TEST(Comparison, CaseFiveEverythingApproximate) {
  const auto res = compare_small(5, 100'000);
  const auto* indep = res.find_bound("md1_exact_waiting");
  const auto* mstar = res.find_bound("mstar_d1_waiting");
  ASSERT_NE(indep, nullptr);
  ASSERT_NE(mstar, nullptr);
  EXPECT_TRUE(indep->approximate);
  EXPECT_TRUE(mstar->approximate);
  EXPECT_FALSE(res.guaranteed_violation());
}

TEST(Comparison, CaseSixPerClass) {
  const auto res = compare_small(6, 100'000);
  ASSERT_NE(res.find_bound("dmdm_waiting_class1"), nullptr);
  ASSERT_NE(res.find_bound("dmdm_waiting_class2"), nullptr);
  EXPECT_TRUE(res.find_bound("dmdm_waiting_class2")->guaranteed());
}

TEST(Comparison, DeterministicForSeed) {
  std::ostringstream a;
  std::ostringstream b;
  write_comparison_csv(a, compare_small(4, 50'000));
  write_comparison_csv(b, compare_small(4, 50'000));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "curve_label,tau_s,prob");
}

TEST(CheckCurve, NoiseFloorAndSlack) {
  const std::vector<double> grid{0.0, 1.0, 2.0};
  const BoundCurve bound{grid, {1.0, 0.1, 0.001}, "b", false};
  EmpiricalEntry emp{"e", {grid, {1.0, 0.2, 0.002}, 1000, 0, false}};
  // p_hat = 0.002 sits below 10 / n, so only tau = 1 is judged.
  EXPECT_EQ(check_curve(emp, bound, ComparisonOptions{}).violations, 1u);
  emp.ccdf.probs[1] = 0.1 + 2.0 * binomial_se(0.1 + 2.0 * 0.0095, 1000);
  EXPECT_EQ(check_curve(emp, bound, ComparisonOptions{}).violations, 0u);
}
