#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>

#include "nilm/error.hpp"
#include "nilm/labeling.hpp"
#include "nilm/simulator.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

namespace nilm {
namespace {

using testing::Gen;

constexpr double kFs = 10'000.0;
const Mains kMains{};

std::vector<PeriodFeatures> features(const Waveform& i) {
  const auto v = mains_voltage(kMains, i.sample_rate, i.duration());
  return compute_period_features(i, v, segment_periods(v), 20);
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidArgument;
}

TEST(PowerFactorLabel, Thresholds) {
  EXPECT_EQ(power_factor_label(0.99, 0.02), PowerFactorClass::resistive_like);
  EXPECT_EQ(power_factor_label(0.97, 0.02), PowerFactorClass::resistive_like);
  EXPECT_EQ(power_factor_label(0.80, 0.05), PowerFactorClass::motor_like);
  EXPECT_EQ(power_factor_label(0.99, 0.60), PowerFactorClass::electronic_like);
  EXPECT_EQ(power_factor_label(0.60, 0.90), PowerFactorClass::electronic_like);
}

TEST(PowerFactorLabel, SimulatedLoads) {
  const auto heater = synth_two_state({2000.0, 1.0, {}}, {}, kMains, kFs, 1.0);
  const auto motor = synth_two_state({750.0, 0.8, {}}, {}, kMains, kFs, 1.0);
  const auto rect =
      synth_ubr(UbrParams{800.0, std::numbers::pi / 6, {}}, LoadClass::ubr_single_phase, {}, kMains, kFs, 1.0);
  EXPECT_EQ(power_factor_label(features(heater)), PowerFactorClass::resistive_like);
  EXPECT_EQ(power_factor_label(features(motor)), PowerFactorClass::motor_like);
  EXPECT_EQ(power_factor_label(features(rect)), PowerFactorClass::electronic_like);
  const auto f = features(heater);
  EXPECT_EQ(code_of([&] { power_factor_label(std::span(f).first(9)); }), ErrorCode::InsufficientData);
}

TransientParams transient(double tau, double peak, double osc_hz = 0.0) {
  TransientParams t;
  t.tau = tau;
  t.peak_ratio = peak;
  t.steady_amp = 5.0;
  t.duration = 1.2;
  if (osc_hz > 0.0) t.oscillations.push_back({osc_hz, 0.5, 0.3, 0.0});
  return t;
}

TEST(TransientFeatures, NamesAndFiniteValues) {
  EXPECT_EQ(transient_feature_names().size(), 18u);
  const auto w = synth_transient(transient(0.05, 4.0, 12.0), kMains, kFs);
  const auto f = extract_transient_features(w, 5.0);
  ASSERT_EQ(f.values.size(), 18u);
  for (double v : f.values) EXPECT_TRUE(std::isfinite(v));
  EXPECT_THROW(f.get("no_such_feature"), Error);
}

TEST(TransientFeatures, RecoversEnvelopeParameters) {
  for (double tau : {0.03, 0.05, 0.1}) {
    for (double peak : {2.0, 4.0}) {
      const auto f = extract_transient_features(synth_transient(transient(tau, peak), kMains, kFs), 5.0);
      EXPECT_NEAR(f.get("decay_constant_s"), tau, 0.1 * tau) << tau << " " << peak;
      // Fundamental over the first period sees the envelope averaged across it.
      const double first = 1.0 + (peak - 1.0) * (tau / 0.02) * (1.0 - std::exp(-0.02 / tau));
      EXPECT_NEAR(f.get("peak_to_steady"), first, 0.02 * first);
      EXPECT_GE(f.get("peak_abs_current"), 0.98 * first);
      EXPECT_LE(f.get("peak_abs_current"), peak);
      EXPECT_LT(f.get("thd_steady"), 0.01);
    }
  }
}

TEST(TransientFeatures, RecoversOscillationFrequency) {
  for (double hz : {8.0, 12.0, 17.0}) {
    const auto f = extract_transient_features(synth_transient(transient(0.05, 3.0, hz), kMains, kFs), 5.0);
    EXPECT_NEAR(f.get("oscillation_hz"), hz, 0.15 * hz);
  }
}

TEST(TransientFeatures, InvariantToAmplitude) {
  auto a = transient(0.06, 3.0, 10.0);
  auto b = a;
  b.steady_amp = 40.0;
  const auto fa = extract_transient_features(synth_transient(a, kMains, kFs), a.steady_amp);
  const auto fb = extract_transient_features(synth_transient(b, kMains, kFs), b.steady_amp);
  for (std::size_t k = 0; k < fa.values.size(); ++k) {
    EXPECT_NEAR(fa.values[k], fb.values[k], 1e-6 * std::max(1.0, std::abs(fa.values[k])))
        << transient_feature_names()[k];
  }
}

TEST(TransientFeatures, NeverSettles) {
  auto t = transient(5.0, 4.0);
  t.duration = 0.5;
  const auto w = synth_transient(t, kMains, kFs);
  EXPECT_EQ(code_of([&] { extract_transient_features(w, 5.0); }), ErrorCode::NoSteadyState);
  EXPECT_EQ(code_of([&] { extract_transient_features(w, 0.0); }), ErrorCode::InvalidArgument);
}

std::vector<LabeledFeatures> blobs(Gen& gen, int classes, int per_class, double spread) {
  const std::size_t F = transient_feature_names().size();
  std::vector<LabeledFeatures> out;
  for (int c = 0; c < classes; ++c) {
    std::vector<double> centre(F);
    for (std::size_t k = 0; k < F; ++k) centre[k] = 10.0 * static_cast<double>(c) + static_cast<double>(k);
    for (int s = 0; s < per_class; ++s) {
      LabeledFeatures l{"class_" + std::to_string(c), {centre}};
      for (auto& v : l.features.values) v += gen.normal(spread);
      out.push_back(std::move(l));
    }
  }
  return out;
}

TEST(Fingerprint, TrainAndClassifySeparatedClasses) {
  Gen gen(21);
  const auto train = blobs(gen, 4, 6, 0.5);
  const auto model = train_fingerprint(train);
  EXPECT_EQ(model.classes.size(), 4u);
  EXPECT_EQ(model.feature_names, transient_feature_names());
  for (double s : model.scale) EXPECT_GT(s, 0.0);
  const auto test = blobs(gen, 4, 5, 0.5);
  std::vector<std::string> truth, pred;
  for (const auto& t : test) {
    const auto m = classify_fingerprint(model, t.features);
    truth.push_back(t.label);
    pred.push_back(m.label);
    EXPECT_GE(m.confidence, 1.0);
  }
  EXPECT_DOUBLE_EQ(macro_f1(truth, pred), 1.0);
}

TEST(Fingerprint, CentroidSampleHasMaximalConfidenceOrder) {
  Gen gen(22);
  const auto train = blobs(gen, 3, 4, 0.1);
  const auto model = train_fingerprint(train);
  const auto a = classify_fingerprint(model, train[0].features);
  TransientFeatureVector midway{train[0].features.values};
  for (std::size_t k = 0; k < midway.values.size(); ++k) {
    midway.values[k] = 0.5 * (train[0].features.values[k] + train[4].features.values[k]);
  }
  const auto b = classify_fingerprint(model, midway);
  EXPECT_GT(a.confidence, b.confidence);
  EXPECT_TRUE(b.low_confidence);
  EXPECT_FALSE(a.low_confidence);
}

TEST(Fingerprint, ClassTooSmall) {
  Gen gen(23);
  auto train = blobs(gen, 2, 3, 0.5);
  train.pop_back();
  train.pop_back();
  EXPECT_EQ(code_of([&] { train_fingerprint(train); }), ErrorCode::ClassTooSmall);
  EXPECT_EQ(code_of([&] { train_fingerprint({}); }), ErrorCode::ClassTooSmall);
}

TEST(Fingerprint, CollisionWarning) {
  Gen gen(24);
  auto train = blobs(gen, 2, 3, 0.5);
  train.push_back({"class_1", train[0].features});
  std::vector<std::string> warnings;
  train_fingerprint(train, &warnings);
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(MacroF1, KnownValues) {
  const std::vector<std::string> t{"a", "a", "b", "b"};
  EXPECT_DOUBLE_EQ(macro_f1(t, t), 1.0);
  const std::vector<std::string> p{"a", "b", "b", "b"};
  // a: tp 1, fn 1 -> 2/3; b: tp 2, fp 1 -> 4/5.
  EXPECT_NEAR(macro_f1(t, p), 0.5 * (2.0 / 3.0 + 0.8), 1e-12);
  const std::vector<std::string> wrong{"b", "b", "a", "a"};
  EXPECT_DOUBLE_EQ(macro_f1(t, wrong), 0.0);
  EXPECT_EQ(code_of([&] { macro_f1(t, std::vector<std::string>{"a"}); }), ErrorCode::LengthMismatch);
}

}  // namespace
}  // namespace nilm
