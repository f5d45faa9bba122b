#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "nilm/events.hpp"
#include "nilm/signal.hpp"

namespace nilm {

struct HarmonicCorrelation {
  int harmonic_index = 0;
  double pearson_r = 0.0;
  double slope = 0.0;      // W/A
  double intercept = 0.0;  // W
  std::size_t samples = 0;
};

/// Harmonic magnitude series |I_k| per period, tagged with its order.
struct HarmonicSeries {
  int order = 0;
  std::vector<double> magnitude;
};

std::vector<double> residual_power(std::span<const double> aggregate_p,
                                   const std::vector<std::vector<double>>& estimates);

inline constexpr std::size_t kMinCorrelationSamples = 30;

/// argmax_k |r(|I_k|, dp)| over periods where |dp| > noise_floor_w (and mask, if given).
/// Throws NoCorrelatedHarmonic when the best |r| < min_abs_r or too few samples remain.
HarmonicCorrelation find_correlated_harmonic(std::span<const double> dp, std::span<const HarmonicSeries> harmonics,
                                             double min_abs_r = 0.9, double noise_floor_w = 0.0,
                                             const std::vector<bool>* mask = nullptr);

struct FsmFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::vector<double> estimate;
};

/// OLS of dp on |I_x| over the on-mask after a running median of `smooth`
/// periods; estimate = fit on the mask, clamped at 0, and 0 elsewhere.
FsmFit fit_and_estimate(std::span<const double> dp, std::span<const double> hx, const std::vector<bool>& on_mask,
                        std::size_t smooth = 5);

std::vector<int> default_candidate_harmonics();

struct FsmStageParams {
  std::vector<int> candidates = default_candidate_harmonics();
  double min_abs_r = 0.9;
  std::size_t smooth = 5;
  double step_fraction = 0.5;   // of the harmonic's robust range
  std::size_t step_guard = 2;   // periods skipped either side of an event
  std::size_t step_window = 5;  // periods in each median
};

struct FsmStageResult {
  HarmonicCorrelation correlation;
  std::vector<std::size_t> motor_clusters;  // indices into the cluster list
  std::vector<bool> on_mask;
  FsmFit fit;
  double baseline = 0.0;  // residual level over the off-periods, removed before fitting
  bool mask_from_events = true;  // false: derived from the harmonic level
};

/// Locates the motor among the two-state clusters by coincident steps in a
/// candidate harmonic, restores its power into the residual and fits.
/// `base_residual` is aggregate minus every other estimate including all clusters.
FsmStageResult run_fsm_stage(std::span<const double> base_residual, std::span<const PeriodFeatures> features,
                             std::span<const TwoStateCluster> clusters,
                             const std::vector<std::vector<double>>& cluster_series, const FsmStageParams& params = {});

}  // namespace nilm
