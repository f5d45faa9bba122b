#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "nilm/signal.hpp"

namespace nilm {

enum class PowerFactorClass { resistive_like, motor_like, electronic_like };

std::string_view to_string(PowerFactorClass c) noexcept;

struct PowerFactorThresholds {
  double resistive_min_pf = 0.97;
  double electronic_min_thd = 0.40;
};

/// Medians of power factor and THD over an on-interval of >= 10 periods.
PowerFactorClass power_factor_label(std::span<const PeriodFeatures> on_interval,
                                    const PowerFactorThresholds& thresholds = {});
PowerFactorClass power_factor_label(double power_factor, double thd, const PowerFactorThresholds& thresholds = {});

struct TransientFeatureVector {
  std::vector<double> values;  // ordered as transient_feature_names()

  [[nodiscard]] double get(std::string_view name) const;
};

const std::vector<std::string>& transient_feature_names();

struct TransientOptions {
  double mains_frequency = 50.0;
  double settle_band = 0.05;        // relative envelope deviation counted as settled
  std::size_t min_settled_periods = 10;
};

/// Features of a turn-on transient after division by steady_amp (the peak of the
/// steady-state fundamental). Throws NoSteadyState if the envelope never settles.
TransientFeatureVector extract_transient_features(const Waveform& transient, double steady_amp,
                                                  const TransientOptions& options = {});

struct LabeledFeatures {
  std::string label;
  TransientFeatureVector features;
};

struct FingerprintModel {
  std::vector<std::string> feature_names;
  std::vector<double> offset;  // per-feature mean of the training set
  std::vector<double> scale;   // per-feature pooled within-class standard deviation, 1 when constant
  std::vector<std::string> classes;
  std::vector<std::vector<double>> centroids;  // normalised space
};

/// Throws ClassTooSmall when a class has fewer than two samples. Identical
/// samples under different labels are reported through `warnings`.
FingerprintModel train_fingerprint(std::span<const LabeledFeatures> samples,
                                   std::vector<std::string>* warnings = nullptr);

struct FingerprintMatch {
  std::string label;
  double confidence = 0.0;  // second-nearest over nearest distance
  double distance = 0.0;
  bool low_confidence = false;
};

inline constexpr double kLowConfidenceRatio = 1.2;

FingerprintMatch classify_fingerprint(const FingerprintModel& model, const TransientFeatureVector& features);

/// Unweighted mean of per-class F1 over the classes present in `truth`.
double macro_f1(std::span<const std::string> truth, std::span<const std::string> predicted);

}  // namespace nilm
