#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "nilm/error.hpp"
#include "nilm/fsm.hpp"
#include "nilm/simulator.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

namespace nilm {
namespace {

using testing::Gen;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidArgument;
}

TEST(ResidualPower, SubtractsEveryEstimate) {
  const std::vector<double> agg{10, 20, 30, 40};
  const std::vector<std::vector<double>> est{{1, 2, 3, 4}, {0, 5, 0, 5}};
  EXPECT_EQ(residual_power(agg, est), (std::vector<double>{9, 13, 27, 31}));
  EXPECT_EQ(residual_power(agg, {}), agg);
  EXPECT_EQ(code_of([&] { residual_power(agg, {{1.0, 2.0}}); }), ErrorCode::LengthMismatch);
}

TEST(FindCorrelatedHarmonic, MatchesNaivePearsonArgmax) {
  Gen gen(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 200;
    std::vector<double> dp(n);
    for (auto& v : dp) v = gen.uniform(600.0, 950.0);
    std::vector<HarmonicSeries> hs;
    const int target = gen.integer(2, 13);
    for (int order = 2; order <= 13; ++order) {
      HarmonicSeries h{order, std::vector<double>(n)};
      for (std::size_t k = 0; k < n; ++k) {
        h.magnitude[k] = order == target ? 4e-4 * dp[k] + 0.02 + gen.normal(0.005) : gen.uniform(0.0, 0.5);
      }
      hs.push_back(std::move(h));
    }
    const auto c = find_correlated_harmonic(dp, hs);
    double best = -1.0;
    int best_order = 0;
    for (const auto& h : hs) {
      const double r = std::abs(testing::naive_pearson(h.magnitude, dp));
      if (r > best) {
        best = r;
        best_order = h.order;
      }
    }
    EXPECT_EQ(c.harmonic_index, best_order);
    EXPECT_EQ(c.harmonic_index, target);
    EXPECT_NEAR(std::abs(c.pearson_r), best, 1e-12);
    const auto line = testing::naive_ols(hs[static_cast<std::size_t>(target - 2)].magnitude, dp);
    EXPECT_NEAR(c.slope, line.slope, 1e-6 * std::abs(line.slope));
    EXPECT_NEAR(c.intercept, line.intercept, 1e-6 * std::abs(line.slope));
    EXPECT_EQ(c.samples, n);
  }
}

TEST(FindCorrelatedHarmonic, NoiseFloorAndMaskSelectPeriods) {
  const std::size_t n = 100;
  std::vector<double> dp(n, 0.0);
  HarmonicSeries h{3, std::vector<double>(n, 0.0)};
  for (std::size_t k = 0; k < n; ++k) {
    // Half the periods are off; the other half correlate perfectly.
    if (k % 2 == 0) {
      dp[k] = 500.0 + static_cast<double>(k);
      h.magnitude[k] = 0.001 * dp[k];
    } else {
      dp[k] = 5.0;
      h.magnitude[k] = 5.0;
    }
  }
  const std::vector<HarmonicSeries> hs{h};
  const auto all = find_correlated_harmonic(dp, hs, 0.0);
  EXPECT_EQ(all.samples, n);
  EXPECT_LT(all.pearson_r, 0.0);
  const auto c = find_correlated_harmonic(dp, hs, 0.9, 10.0);
  EXPECT_EQ(c.samples, n / 2);
  EXPECT_NEAR(c.pearson_r, 1.0, 1e-12);

  std::vector<bool> mask(n, false);
  for (std::size_t k = 0; k < n; k += 2) mask[k] = true;
  const auto m = find_correlated_harmonic(dp, hs, 0.9, 0.0, &mask);
  EXPECT_EQ(m.samples, n / 2);
  EXPECT_NEAR(m.slope, 1000.0, 1e-6);
}

TEST(FindCorrelatedHarmonic, Errors) {
  Gen gen(5);
  const std::size_t n = 200;
  std::vector<double> dp(n);
  for (auto& v : dp) v = gen.uniform(100.0, 200.0);
  std::vector<HarmonicSeries> noise;
  for (int order = 2; order <= 5; ++order) noise.push_back({order, testing::random_samples(gen, n, 1.0)});
  EXPECT_EQ(code_of([&] { find_correlated_harmonic(dp, noise); }), ErrorCode::NoCorrelatedHarmonic);

  const std::vector<double> short_dp(kMinCorrelationSamples - 1, 1.0);
  const std::vector<HarmonicSeries> short_h{{2, short_dp}};
  EXPECT_EQ(code_of([&] { find_correlated_harmonic(short_dp, short_h, 0.0); }), ErrorCode::NoCorrelatedHarmonic);

  EXPECT_EQ(code_of([&] { find_correlated_harmonic(dp, {}); }), ErrorCode::InvalidArgument);
  const std::vector<HarmonicSeries> wrong{{2, std::vector<double>(n - 1, 0.0)}};
  EXPECT_EQ(code_of([&] { find_correlated_harmonic(dp, wrong); }), ErrorCode::LengthMismatch);
}

TEST(FitAndEstimate, UnsmoothedFitIsOrdinaryLeastSquares) {
  Gen gen(9);
  const std::size_t n = 150;
  std::vector<double> dp(n), hx(n);
  std::vector<bool> mask(n);
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < n; ++k) {
    hx[k] = gen.uniform(0.2, 0.4);
    dp[k] = 2500.0 * hx[k] - 50.0 + gen.normal(10.0);
    mask[k] = gen.chance(0.7);
    if (mask[k]) {
      xs.push_back(hx[k]);
      ys.push_back(dp[k]);
    }
  }
  const auto fit = fit_and_estimate(dp, hx, mask, 1);
  const auto line = testing::naive_ols(xs, ys);
  EXPECT_NEAR(fit.slope, line.slope, 1e-8 * std::abs(line.slope));
  EXPECT_NEAR(fit.intercept, line.intercept, 1e-6);
  for (std::size_t k = 0; k < n; ++k) {
    if (mask[k]) {
      EXPECT_NEAR(fit.estimate[k], std::max(0.0, line.slope * hx[k] + line.intercept), 1e-6);
    } else {
      EXPECT_EQ(fit.estimate[k], 0.0);
    }
  }
}

TEST(FitAndEstimate, SmoothingRejectsIsolatedOutliers) {
  const std::size_t n = 100;
  std::vector<double> dp(n), hx(n);
  for (std::size_t k = 0; k < n; ++k) {
    hx[k] = 0.1 + 0.002 * static_cast<double>(k);
    dp[k] = 2000.0 * hx[k] + 100.0;
  }
  dp[40] += 5000.0;
  dp[70] -= 5000.0;
  const std::vector<bool> mask(n, true);
  const auto fit = fit_and_estimate(dp, hx, mask, 5);
  const auto raw = fit_and_estimate(dp, hx, mask, 1);
  EXPECT_NEAR(fit.slope, 2000.0, 10.0);
  EXPECT_NEAR(fit.intercept, 100.0, 5.0);
  EXPECT_GT(std::abs(raw.slope - 2000.0), 10.0 * std::abs(fit.slope - 2000.0));
}

TEST(FitAndEstimate, EstimateClampedAtZero) {
  const std::size_t n = 60;
  std::vector<double> dp(n), hx(n);
  for (std::size_t k = 0; k < n; ++k) {
    hx[k] = static_cast<double>(k) / static_cast<double>(n);
    dp[k] = 1000.0 * hx[k] - 300.0;
  }
  const auto fit = fit_and_estimate(dp, hx, std::vector<bool>(n, true), 1);
  for (double e : fit.estimate) EXPECT_GE(e, 0.0);
  EXPECT_EQ(fit.estimate[0], 0.0);
  EXPECT_NEAR(fit.estimate[n - 1], dp[n - 1], 1e-9);
}

TEST(FitAndEstimate, Errors) {
  const std::size_t n = 50;
  const std::vector<double> dp(n, 1.0), flat(n, 0.3);
  EXPECT_EQ(code_of([&] { fit_and_estimate(dp, flat, std::vector<bool>(n, true)); }), ErrorCode::DegenerateFit);
  std::vector<bool> few(n, false);
  for (std::size_t k = 0; k < 10; ++k) few[k] = true;
  EXPECT_EQ(code_of([&] { fit_and_estimate(dp, flat, few); }), ErrorCode::InsufficientData);
  EXPECT_EQ(code_of([&] { fit_and_estimate(dp, flat, std::vector<bool>(n - 1, true)); }), ErrorCode::LengthMismatch);
}

TEST(FindCorrelatedHarmonic, SimulatedMotorCouplesToItsHarmonic) {
  const Mains mains;
  const double fs = 10'000.0, duration = 20.0;
  FsmVaryingParams params;
  params.coupling_harmonic = 8;
  params.p_profile.points = {{0.0, 600.0}, {duration, 950.0}};
  const auto i = synth_fsm_varying(params, {}, mains, fs, duration);
  const auto v = mains_voltage(mains, fs, duration);
  const auto f = compute_period_features(i, v, segment_periods(v), 13);
  const auto p = active_power(f);
  std::vector<HarmonicSeries> hs;
  for (int order : default_candidate_harmonics()) hs.push_back({order, harmonic_magnitudes(f, static_cast<std::size_t>(order))});
  const auto c = find_correlated_harmonic(p, hs);
  EXPECT_EQ(c.harmonic_index, 8);
  EXPECT_GT(c.pearson_r, 0.999);
  // |I_8| = a p + b inverts to p = |I_8| / a - b / a.
  EXPECT_NEAR(c.slope, 1.0 / params.coupling_slope, 0.01 / params.coupling_slope);
  EXPECT_NEAR(c.intercept, -params.coupling_intercept / params.coupling_slope, 5.0);
}

}  // namespace
}  // namespace nilm
