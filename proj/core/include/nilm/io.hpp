#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "nilm/error.hpp"
#include "nilm/evaluation.hpp"
#include "nilm/labeling.hpp"
#include "nilm/pipeline.hpp"
#include "nilm/simulator.hpp"

namespace nilm::io {

inline constexpr const char* kWaveformFormat = "nilm.waveforms/1";
inline constexpr const char* kTruthFormat = "nilm.truth/1";
inline constexpr const char* kReportSchema = "nilm.report/1";
inline constexpr const char* kModelSchema = "nilm.model/1";
inline constexpr const char* kEvaluationSchema = "nilm.evaluation/1";

struct WaveformChannel {
  std::string name;
  std::string unit;  // as declared in the file; samples are stored in A or V
  Waveform waveform;
};

struct WaveformSet {
  double sample_rate = 10'000.0;
  double start_time = 0.0;
  std::vector<WaveformChannel> channels;

  /// First channel of the given kind; InvalidArgument when there is none.
  [[nodiscard]] const Waveform& first(SignalKind kind) const;
  [[nodiscard]] const Waveform& current() const { return first(SignalKind::current); }
  [[nodiscard]] const Waveform& voltage() const { return first(SignalKind::voltage); }
};

WaveformSet make_waveform_set(const Waveform& current, const Waveform& voltage);

/// CSV with a '#'-prefixed JSON header line, then `time_s,<channels...>`.
/// Throws ParseError (with the line number) or UnitError.
WaveformSet parse_waveforms(std::istream& in);
WaveformSet read_waveforms(const std::filesystem::path& path);
void write_waveforms(std::ostream& out, const WaveformSet& set);
void write_waveforms(const std::filesystem::path& path, const WaveformSet& set);

/// Per-period true power of every simulated load.
struct TruthTable {
  struct Column {
    std::string id;
    std::string group;
    std::string load_class;
    std::vector<double> p;
  };
  std::vector<double> t_start;
  std::vector<double> duration;
  std::vector<Column> loads;
};

TruthTable truth_table(const GroundTruth& truth, double sample_rate, double start_time = 0.0);
TruthTable parse_truth(std::istream& in);
TruthTable read_truth(const std::filesystem::path& path);
void write_truth(std::ostream& out, const TruthTable& truth);
void write_truth(const std::filesystem::path& path, const TruthTable& truth);

/// Columns summed per group, groups in first-appearance order.
std::vector<NamedSeries> grouped_truth(const TruthTable& truth);

MachineScenario scenario_from_json(std::string_view text);
std::string scenario_to_json(const MachineScenario& scenario);
MachineScenario read_scenario(const std::filesystem::path& path);

/// Keys absent from the document keep their defaults; unknown keys are rejected.
PipelineConfig config_from_json(std::string_view text);
std::string config_to_json(const PipelineConfig& config);
PipelineConfig read_config(const std::filesystem::path& path);

std::string report_to_json(const DisaggregationReport& report, const EvaluationSummary* evaluation = nullptr);
DisaggregationReport report_from_json(std::string_view text);
DisaggregationReport read_report(const std::filesystem::path& path);

std::string evaluation_to_json(const EvaluationSummary& evaluation);

std::string model_to_json(const FingerprintModel& model);
FingerprintModel model_from_json(std::string_view text);
FingerprintModel read_model(const std::filesystem::path& path);

/// Labeled transient feature vectors, one object per sample.
std::string samples_to_json(const std::vector<LabeledFeatures>& samples);
std::vector<LabeledFeatures> samples_from_json(std::string_view text);

/// power.csv (per period: t, aggregate, every estimate, unexplained, and the
/// truth columns when given) and energy.csv (per estimate).
void write_plot_data(const DisaggregationReport& report, const std::filesystem::path& dir,
                     const TruthTable* truth = nullptr);

/// {"error":{"code":"...","message":"..."}}
std::string error_to_json(const Error& error);
std::string error_to_json(std::string_view code, std::string_view message);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace nilm::io
