#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nilm/pipeline.hpp"
#include "nilm/simulator.hpp"

namespace nilm::testing {

struct UbrExperiment {
  std::vector<UbrKind> found;  // kinds in extraction order
  std::vector<double> accuracy;  // per generated load, in generation order
};

/// Rectifier plus a linear sine whose peak is twice the rectifier's peak.
UbrExperiment ubr_with_sine(LoadClass kind, double conduction_angle, double noise_rms = 0.0,
                            double p_mean = 1000.0);

/// Rectifier plus a linear load copying its 1st and 5th harmonic in magnitude and phase.
UbrExperiment ubr_with_matched_harmonics(LoadClass kind, double conduction_angle, double p_mean = 1000.0);

/// Six-pulse and single-phase rectifier together.
UbrExperiment three_and_single_phase(double three_angle, double single_angle, double p_three = 1500.0,
                                     double p_single = 700.0, double noise_rms = 0.0);

struct CaseStudy {
  double weighted_accuracy = 0.0;
  double weighted_accuracy_with_fp = 0.0;
  double identified_energy_fraction = 0.0;
  std::optional<double> motor_accuracy;  // of the truth group named by `motor`
  double seconds = 0.0;                  // simulation plus disaggregation
  EvaluationSummary summary;
  DisaggregationReport report;
};

CaseStudy run_case_study(const MachineScenario& scenario, const std::string& motor = "vacuum_pump",
                         const PipelineConfig& config = {});

struct FingerprintExperiment {
  double macro_f1 = 0.0;
  std::size_t train = 0;
  std::size_t test = 0;
  std::size_t classes = 0;
};

/// `classes` motors whose transient parameters differ by at least `separation`,
/// `per_class` switch-ons each with small jitter, stratified 70/30 split.
FingerprintExperiment motor_fingerprint_experiment(std::uint64_t seed, int classes = 18, int per_class = 12,
                                                   double separation = 0.20);

/// Same motors driving three mechanical loads; labels are the mechanical load.
FingerprintExperiment mechanical_grouping_experiment(std::uint64_t seed, int motors = 6, int per_pair = 8);

/// Detect, cluster and pair events on a noiseless two-state scenario; empty
/// when every load has a cluster with dp within `dp_tol` (relative) and the
/// exact period schedule of its truth series, otherwise what went wrong.
std::string event_exactness_failure(const MachineScenario& scenario, double dp_tol = 0.01);

struct ConservationCheck {
  bool superposition_exact = true;  // aggregate == sum of load currents + noise, bitwise
  bool ubr_exact = true;            // every extraction: ubr + residual == its input, bitwise
  double accounting_max_w = 0.0;    // max |sum(estimates) + unexplained - aggregate| per period
};

ConservationCheck check_conservation(const MachineScenario& scenario);

}  // namespace nilm::testing
