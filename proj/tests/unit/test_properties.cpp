#include <gtest/gtest.h>

#include <cmath>

#include "nilm/pipeline.hpp"
#include "nilm/simulator.hpp"
#include "support/experiments.hpp"
#include "support/generators.hpp"

namespace nilm {
namespace {

using testing::Gen;

TEST(Properties, SimulationIsDeterministicPerSeed) {
  Gen gen(40);
  for (int trial = 0; trial < 5; ++trial) {
    const auto sc = testing::random_mixed_scenario(gen);
    const auto a = compose_machine(sc);
    const auto b = compose_machine(sc);
    EXPECT_EQ(a.current.samples, b.current.samples);
    auto other = sc;
    other.seed += 1;
    const auto c = compose_machine(other);
    if (sc.noise_rms > 0.0) EXPECT_NE(a.current.samples, c.current.samples);
  }
}

TEST(Properties, DisaggregationIsDeterministic) {
  Gen gen(41);
  for (int trial = 0; trial < 3; ++trial) {
    const auto rec = compose_machine(testing::random_mixed_scenario(gen));
    const auto a = disaggregate(rec.current, rec.voltage);
    const auto b = disaggregate(rec.current, rec.voltage);
    ASSERT_EQ(a.estimates.size(), b.estimates.size());
    for (std::size_t i = 0; i < a.estimates.size(); ++i) EXPECT_EQ(a.estimates[i].p_series, b.estimates[i].p_series);
  }
}

TEST(Properties, Conservation) {
  Gen gen(42);
  for (int trial = 0; trial < 10; ++trial) {
    const auto c = testing::check_conservation(testing::random_mixed_scenario(gen));
    EXPECT_TRUE(c.superposition_exact) << "trial " << trial;
    EXPECT_TRUE(c.ubr_exact) << "trial " << trial;
    EXPECT_LE(c.accounting_max_w, 1.0) << "trial " << trial;
  }
}

TEST(Properties, EventMethodIsExactOnSeparableScenarios) {
  Gen gen(43);
  for (int trial = 0; trial < 10; ++trial) {
    const auto why = testing::event_exactness_failure(testing::random_two_state_scenario(gen));
    EXPECT_TRUE(why.empty()) << "trial " << trial << ": " << why;
  }
}

TEST(Properties, PeriodFeaturesAreLinearInCurrent) {
  Gen gen(44);
  const auto rec = compose_machine(testing::random_mixed_scenario(gen, 1.0));
  const auto b = segment_periods(rec.voltage);
  const double c = gen.uniform(0.1, 10.0);
  Waveform scaled = rec.current;
  for (auto& x : scaled.samples) x *= c;
  const auto f = compute_period_features(rec.current, rec.voltage, b, 10);
  const auto g = compute_period_features(scaled, rec.voltage, b, 10);
  ASSERT_EQ(f.size(), g.size());
  for (std::size_t k = 0; k < f.size(); ++k) {
    EXPECT_NEAR(g[k].p, c * f[k].p, 1e-9 * std::max(1.0, std::abs(c * f[k].p)));
    for (std::size_t h = 0; h < f[k].harmonics.size(); ++h) {
      EXPECT_NEAR(std::abs(g[k].harmonics[h] - c * f[k].harmonics[h]), 0.0, 1e-9 * std::max(1.0, c));
    }
  }
}

}  // namespace
}  // namespace nilm
