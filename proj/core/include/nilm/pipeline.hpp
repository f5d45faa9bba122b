#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nilm/evaluation.hpp"
#include "nilm/events.hpp"
#include "nilm/fsm.hpp"
#include "nilm/labeling.hpp"
#include "nilm/signal.hpp"
#include "nilm/ubr.hpp"

namespace nilm {

enum class EstimateClass { two_state, ubr_single_phase, ubr_three_phase, fsm_varying, residual_unexplained };
enum class SourceAlgorithm { ubr, events, fsm, accounting };

std::string_view to_string(EstimateClass c) noexcept;
std::string_view to_string(SourceAlgorithm s) noexcept;
std::optional<EstimateClass> estimate_class_from_string(std::string_view s) noexcept;
std::optional<SourceAlgorithm> source_algorithm_from_string(std::string_view s) noexcept;

struct FingerprintLabel {
  std::string label;
  double confidence = 0.0;
  bool low_confidence = false;
};

struct LoadEstimate {
  std::string id;
  EstimateClass load_class = EstimateClass::two_state;
  SourceAlgorithm source = SourceAlgorithm::events;
  std::vector<double> p_series;  // W per period
  double energy_wh = 0.0;
  std::vector<PeriodInterval> schedule;  // empty when not switched
  std::optional<double> power_factor;
  std::optional<double> thd;
  std::optional<std::string> label;
  std::optional<FingerprintLabel> fingerprint;
};

struct PipelineConfig {
  bool enable_ubr = true;
  bool enable_events = true;
  bool enable_fsm = true;
  double nominal_frequency = 50.0;
  std::size_t harmonic_count = 20;
  ExtractionParams ubr;
  StepDetectionParams steps;
  ClusterParams cluster;
  FsmStageParams fsm;
  std::uint64_t seed = 0;  // echoed only; the pipeline itself is deterministic
};

struct UbrStageInfo {
  UbrKind kind = UbrKind::none;
  double agreement = 0.0;
};

struct EventStageInfo {
  std::size_t events = 0;
  std::size_t clusters = 0;
  std::size_t unpaired = 0;
};

struct DisaggregationReport {
  double sample_rate = 0.0;
  std::vector<double> period_t_start;   // s
  std::vector<double> period_duration;  // s
  std::vector<double> aggregate_p;
  std::vector<double> unexplained_p;
  std::vector<LoadEstimate> estimates;
  std::vector<UbrStageInfo> ubr_stage;
  EventStageInfo event_stage;
  std::optional<HarmonicCorrelation> fsm_stage;
  std::vector<std::string> warnings;
  PipelineConfig config;

  [[nodiscard]] std::size_t num_periods() const noexcept { return aggregate_p.size(); }
};

inline constexpr const char* kResidualId = "residual_unexplained";

/// UBR peeling, then events on the residual, then the harmonic-correlation
/// stage on the remaining gap, then accounting of what is left.
DisaggregationReport disaggregate(const Waveform& current, const Waveform& voltage, const PipelineConfig& config = {});

/// Recomputes unexplained = aggregate - sum(estimates) and moves it into the
/// catch-all estimate. Idempotent.
void attribute_unexplained(DisaggregationReport& report);

/// Recomputes unexplained from the current estimate list without moving it.
void recompute_unexplained(DisaggregationReport& report);

/// Energy of every estimate except the catch-all over the aggregate energy.
double identified_energy_fraction(const DisaggregationReport& report);

struct EvaluationRow {
  std::string kind;  // "matched", "residual" or "false_positive"
  std::string estimate_id;
  std::vector<std::string> truth_ids;
  double e_est = 0.0;  // Wh
  AccuracyResult result;
};

struct EvaluationSummary {
  std::vector<EvaluationRow> rows;
  std::optional<double> weighted_accuracy;             // false positives excluded
  std::optional<double> weighted_accuracy_with_fp;     // their delta_e added to the numerator
  double identified_energy_fraction = 0.0;
};

/// Truth series must already be summed per group and span the report's periods.
EvaluationSummary evaluate_report(const DisaggregationReport& report, std::span<const NamedSeries> truths);

struct LabelOptions {
  PowerFactorThresholds thresholds;
  TransientOptions transient;
  std::size_t transient_periods = 100;  // taken after the first switch-on
};

/// Power-factor hint for each estimate. With the recording, the first
/// switch-on of every scheduled estimate is isolated by subtracting the period
/// before it; its steady part refines the hint and, given a model, its
/// transient is fingerprinted. Per-estimate failures become report warnings.
void label_estimates(DisaggregationReport& report, const FingerprintModel* model = nullptr,
                     const Waveform* current = nullptr, const Waveform* voltage = nullptr,
                     const LabelOptions& options = {});

}  // namespace nilm
