#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "nilm/error.hpp"
#include "nilm/events.hpp"
#include "nilm/simulator.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

namespace nilm {
namespace {

using testing::Gen;

SwitchEvent ev(std::size_t k, double dp, double dq = 0.0) {
  return {k, dp, dq, dp > 0.0 ? Direction::on : Direction::off};
}

std::vector<double> levels(std::size_t n, const std::vector<std::pair<std::size_t, double>>& steps) {
  std::vector<double> p(n, 0.0);
  for (auto [k, dp] : steps) {
    for (std::size_t j = k; j < n; ++j) p[j] += dp;
  }
  return p;
}

TEST(DetectSteps, ConstantSeriesHasNoEvents) {
  const std::vector<double> p(500, 1234.0), q(500, 100.0);
  EXPECT_TRUE(detect_steps(p, q).empty());
}

TEST(DetectSteps, SingleStep) {
  const auto p = levels(300, {{100, 2000.0}});
  const std::vector<double> q(p.size(), 0.0);
  const auto e = detect_steps(p, q);
  ASSERT_EQ(e.size(), 1u);
  EXPECT_EQ(e[0].period_index, 100u);
  EXPECT_DOUBLE_EQ(e[0].dp, 2000.0);
  EXPECT_EQ(e[0].direction, Direction::on);
}

TEST(DetectSteps, StepInSimulatedWaveform) {
  MachineScenario sc;
  sc.duration = 4.0;
  sc.noise_rms = 0.0;
  sc.noise_rel = 0.0;
  LoadModel m;
  m.id = "heater";
  m.load_class = LoadClass::two_state;
  m.params = TwoStateParams{2000.0, 1.0, {}};
  m.schedule = {{2.0, 10.0}};
  sc.loads.push_back(m);
  const auto rec = compose_machine(sc);
  const auto f = compute_period_features(rec.current, rec.voltage, segment_periods(rec.voltage), 1);
  const auto e = detect_steps(f);
  ASSERT_EQ(e.size(), 1u);
  EXPECT_NEAR(static_cast<double>(e[0].period_index), 100.0, 1.0);
  EXPECT_NEAR(e[0].dp, 2000.0, 20.0);
}

TEST(DetectSteps, Staircase) {
  std::vector<std::pair<std::size_t, double>> steps;
  for (std::size_t k = 0; k < 5; ++k) steps.push_back({50 + 60 * k, 300.0 + 100.0 * static_cast<double>(k)});
  const auto p = levels(400, steps);
  const std::vector<double> q(p.size(), 0.0);
  const auto e = detect_steps(p, q);
  ASSERT_EQ(e.size(), steps.size());
  for (std::size_t k = 0; k < steps.size(); ++k) {
    EXPECT_EQ(e[k].period_index, steps[k].first);
    EXPECT_DOUBLE_EQ(e[k].dp, steps[k].second);
  }
}

TEST(DetectSteps, SubThresholdStepIgnored) {
  const auto p = levels(200, {{100, 30.0}});
  const std::vector<double> q(p.size(), 0.0);
  EXPECT_TRUE(detect_steps(p, q, 50.0).empty());
}

TEST(DetectSteps, ShiftEquivariance) {
  Gen gen(7);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::pair<std::size_t, double>> steps;
    std::size_t k = 20;
    for (int s = 0; s < 4; ++s) {
      k += static_cast<std::size_t>(gen.integer(15, 40));
      steps.push_back({k, gen.uniform(100.0, 800.0) * (gen.chance(0.5) ? 1.0 : -1.0)});
    }
    const auto p = levels(k + 60, steps);
    const std::size_t shift = static_cast<std::size_t>(gen.integer(1, 30));
    std::vector<double> shifted(shift, p.front());
    shifted.insert(shifted.end(), p.begin(), p.end());
    const std::vector<double> q(p.size(), 0.0), qs(shifted.size(), 0.0);
    const auto a = detect_steps(p, q);
    const auto b = detect_steps(shifted, qs);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t j = 0; j < a.size(); ++j) {
      EXPECT_EQ(a[j].period_index + shift, b[j].period_index);
      EXPECT_DOUBLE_EQ(a[j].dp, b[j].dp);
    }
  }
}

TEST(DetectSteps, LengthMismatch) {
  const std::vector<double> p(10, 0.0), q(9, 0.0);
  try {
    detect_steps(p, q);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LengthMismatch);
  }
}

TEST(ClusterEvents, OneLoadTwoCycles) {
  const std::vector<SwitchEvent> e{ev(10, 2000.0), ev(50, -2000.0), ev(100, 2000.0), ev(150, -2000.0)};
  const auto c = cluster_events(e);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_DOUBLE_EQ(c[0].mean_dp, 2000.0);
  EXPECT_EQ(c[0].schedule, (std::vector<PeriodInterval>{{10, 50}, {100, 150}}));
  EXPECT_TRUE(c[0].unpaired.empty());
}

TEST(ClusterEvents, NestedSchedules) {
  const std::vector<SwitchEvent> e{ev(10, 2000.0), ev(20, 500.0), ev(30, -500.0), ev(40, -2000.0)};
  const auto c = cluster_events(e, 0.10, 30.0);
  ASSERT_EQ(c.size(), 2u);

  const std::vector<double> truth_dp{2000.0, 500.0};
  const std::vector<std::vector<PeriodInterval>> truth_schedule{{{10, 40}}, {{20, 30}}};
  const auto match = testing::exhaustive_assignment(c.size(), truth_dp.size(), [&](std::size_t i, std::size_t j) {
    return 1.0 / (1.0 + std::abs(c[i].mean_dp - truth_dp[j]));
  });
  for (std::size_t i = 0; i < c.size(); ++i) {
    ASSERT_TRUE(match[i].has_value());
    EXPECT_DOUBLE_EQ(c[i].mean_dp, truth_dp[*match[i]]);
    EXPECT_EQ(c[i].schedule, truth_schedule[*match[i]]);
  }
}

TEST(ClusterEvents, AbsoluteToleranceMergesSmallSteps) {
  const std::vector<SwitchEvent> e{ev(10, 80.0), ev(20, -80.0), ev(40, 85.0), ev(60, -85.0)};
  const auto c = cluster_events(e, 0.10, 100.0);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_DOUBLE_EQ(c[0].mean_dp, 82.5);
  EXPECT_EQ(c[0].schedule, (std::vector<PeriodInterval>{{10, 20}, {40, 60}}));
}

TEST(ClusterEvents, ReactivePowerSeparatesEqualActiveSteps) {
  const std::vector<SwitchEvent> e{ev(10, 1000.0, 0.0), ev(20, -1000.0, 0.0), ev(30, 1000.0, 600.0),
                                   ev(40, -1000.0, -600.0)};
  const auto c = cluster_events(e);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_NEAR(c[0].mean_dq, 0.0, 1e-12);
  EXPECT_NEAR(c[1].mean_dq, 600.0, 1e-12);
}

TEST(ClusterEvents, EdgeExtension) {
  const std::vector<SwitchEvent> e{ev(30, -700.0), ev(60, 700.0), ev(90, -700.0), ev(150, 700.0)};
  const auto open = cluster_events(e, 0.1, 30.0, 0);
  ASSERT_EQ(open.size(), 1u);
  EXPECT_EQ(open[0].schedule, (std::vector<PeriodInterval>{{60, 90}}));
  EXPECT_EQ(open[0].unpaired.size(), 2u);
  const auto edged = cluster_events(e, 0.1, 30.0, 200);
  EXPECT_EQ(edged[0].schedule, (std::vector<PeriodInterval>{{0, 30}, {60, 90}, {150, 200}}));
  EXPECT_TRUE(edged[0].unpaired.empty());
}

TEST(ClusterEvents, EveryEventInExactlyOneCluster) {
  Gen gen(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<SwitchEvent> e;
    const int n = gen.integer(1, 30);
    for (int k = 0; k < n; ++k) {
      const double dp = gen.uniform(60.0, 3000.0) * (gen.chance(0.5) ? 1.0 : -1.0);
      e.push_back(ev(static_cast<std::size_t>(gen.integer(0, 1000)), dp, gen.uniform(-300.0, 300.0)));
    }
    const auto c = cluster_events(e);
    std::multiset<std::pair<std::size_t, double>> in, out;
    for (const auto& x : e) in.insert({x.period_index, x.dp});
    for (const auto& cl : c) {
      for (const auto& x : cl.events) out.insert({x.period_index, x.dp});
      ASSERT_TRUE(std::is_sorted(cl.events.begin(), cl.events.end(),
                                 [](const auto& a, const auto& b) { return a.period_index < b.period_index; }));
      // Members stay within tolerance of the cluster mean.
      const double tol = std::max(0.10 * cl.mean_dp, 30.0);
      for (const auto& x : cl.events) EXPECT_LE(std::abs(std::abs(x.dp) - cl.mean_dp), tol + 1e-9);
      for (const auto& iv : cl.schedule) EXPECT_LT(iv.begin, iv.end);
    }
    EXPECT_EQ(in, out);
  }
}

TEST(ClusterEvents, InvalidTolerance) {
  const std::vector<SwitchEvent> e{ev(1, 100.0)};
  EXPECT_THROW(cluster_events(e, 0.0, 30.0), Error);
  EXPECT_THROW(cluster_events(e, 0.1, -1.0), Error);
}

TEST(ReconstructPower, FillsScheduleOnly) {
  TwoStateCluster c;
  c.mean_dp = 500.0;
  c.schedule = {{2, 4}, {7, 12}};
  const auto s = reconstruct_power(std::vector<TwoStateCluster>{c}, 10);
  ASSERT_EQ(s.size(), 1u);
  const std::vector<double> want{0, 0, 500, 500, 0, 0, 0, 500, 500, 500};
  EXPECT_EQ(s[0], want);
}

TEST(ReconstructPower, RoundTripsSteps) {
  const std::vector<SwitchEvent> e{ev(10, 2000.0), ev(20, 500.0), ev(30, -500.0), ev(40, -2000.0)};
  const auto p = levels(60, {{10, 2000.0}, {20, 500.0}, {30, -500.0}, {40, -2000.0}});
  const auto parts = reconstruct_power(cluster_events(e), p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    double sum = 0.0;
    for (const auto& s : parts) sum += s[k];
    EXPECT_DOUBLE_EQ(sum, p[k]);
  }
}

}  // namespace
}  // namespace nilm
