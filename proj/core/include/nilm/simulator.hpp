#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "nilm/sensor.hpp"
#include "nilm/signal.hpp"

namespace nilm {

enum class LoadClass { two_state, ubr_single_phase, ubr_three_phase, fsm_varying, linear_sine };

std::string_view to_string(LoadClass c) noexcept;
std::optional<LoadClass> load_class_from_string(std::string_view s) noexcept;

/// Half-open on-interval [t_on, t_off) in seconds.
struct Interval {
  double t_on = 0.0;
  double t_off = 0.0;
};

/// On-intervals; an empty schedule means the load is on for the whole record.
using Schedule = std::vector<Interval>;

void validate_schedule(const Schedule& schedule);

/// Per-sample on/off mask. Sample n is on when ceil(t_on*fs) <= n < ceil(t_off*fs).
std::vector<bool> schedule_mask(const Schedule& schedule, double sample_rate, std::size_t samples);

/// Current term amplitude * cos(order * theta + phase), theta = 2*pi*f*t with the
/// mains voltage proportional to sin(theta). Matches the DFT coefficient convention.
struct HarmonicTerm {
  int order = 1;
  double amplitude = 0.0;
  double phase = 0.0;
};

/// Piecewise-linear function of time; constant beyond the end points.
struct Profile {
  std::vector<std::pair<double, double>> points;  // (t, value), t increasing

  [[nodiscard]] bool empty() const noexcept { return points.empty(); }
  [[nodiscard]] double at(double t) const noexcept;
  [[nodiscard]] double min_value() const noexcept;
  [[nodiscard]] double max_value() const noexcept;
};

struct TwoStateParams {
  double p_on = 0.0;          // W
  double power_factor = 1.0;  // (0, 1], lagging
  std::vector<HarmonicTerm> harmonics;  // amplitudes relative to the fundamental

  void validate() const;
};

struct UbrParams {
  double p_mean = 0.0;            // W
  double conduction_angle = 0.5;  // rad, full pulse width in mains angle
  Profile power_profile;          // multiplier of p_mean; empty = 1

  void validate(LoadClass kind) const;
};

struct FsmVaryingParams {
  double p_base = 750.0;  // W, start value of a generated profile
  Profile p_profile;      // W; generated from the bounds when empty
  double p_min = 600.0;
  double p_max = 950.0;
  double knot_interval = 2.0;  // s between random-walk knots
  double step_sigma = 60.0;    // W per knot
  double step_dp = 750.0;      // W and var at switch-on; fix the power factor
  double step_dq = 560.0;
  int coupling_harmonic = 8;
  double coupling_slope = 4e-4;      // A/W
  double coupling_intercept = 0.02;  // A
  double coupling_phase = 0.0;

  void validate() const;
  [[nodiscard]] double power_factor() const noexcept;
};

/// General linear load: a sum of harmonic terms (order 1 is the fundamental).
struct LinearParams {
  std::vector<HarmonicTerm> terms;

  void validate() const;
};

using LoadParams = std::variant<TwoStateParams, UbrParams, FsmVaryingParams, LinearParams>;

struct LoadModel {
  std::string id;
  std::string group;  // loads sharing a group are scored as one; empty = id
  LoadClass load_class = LoadClass::two_state;
  LoadParams params;
  Schedule schedule;

  [[nodiscard]] const std::string& group_name() const noexcept { return group.empty() ? id : group; }
  void validate() const;
};

struct MachineScenario {
  std::vector<LoadModel> loads;
  Mains mains;
  double duration = 10.0;        // s
  double sample_rate = 10'000.0; // Hz
  double noise_rms = 1e-3;       // A, absolute part
  double noise_rel = 0.005;      // fraction of the clean aggregate RMS
  std::optional<SensorModel> sensor;
  std::uint64_t seed = 1;

  void validate() const;
  [[nodiscard]] std::size_t sample_count() const noexcept;
};

struct LoadTruth {
  std::string id;
  std::string group;
  LoadClass load_class = LoadClass::two_state;
  std::vector<double> current;  // A, empty when not retained
  std::vector<double> p_series; // W per period
};

struct GroundTruth {
  std::vector<double> boundaries;
  std::vector<double> period_durations;  // s
  std::vector<LoadTruth> loads;
  std::vector<double> noise;  // A, added to the clean sum
  double noise_sigma = 0.0;

  /// Per-group summed power series, groups in first-appearance order.
  [[nodiscard]] std::vector<std::pair<std::string, std::vector<double>>> group_series() const;
};

struct MachineRecording {
  Waveform current;
  Waveform voltage;
  GroundTruth truth;
};

Waveform mains_voltage(const Mains& mains, double sample_rate, double duration);

Waveform synth_two_state(const TwoStateParams& params, const Schedule& schedule, const Mains& mains,
                         double sample_rate, double duration);

/// Active power of a unit-amplitude pulse train against the mains voltage.
double ubr_unit_power(LoadClass kind, double conduction_angle, const Mains& mains);

Waveform synth_ubr(const UbrParams& params, LoadClass kind, const Schedule& schedule, const Mains& mains,
                   double sample_rate, double duration);

Waveform synth_fsm_varying(const FsmVaryingParams& params, const Schedule& schedule, const Mains& mains,
                           double sample_rate, double duration);

Waveform synth_linear(const LinearParams& params, const Schedule& schedule, const Mains& mains,
                      double sample_rate, double duration);

/// Clipped random walk between [lo, hi] with smooth interpolation between knots.
Profile random_walk_profile(double start, double lo, double hi, double duration, double knot_interval,
                            double step_sigma, std::mt19937_64& rng);

struct Oscillation {
  double frequency = 0.0;  // Hz
  double amplitude = 0.0;  // relative to the steady amplitude
  double decay = 0.1;      // s
  double phase = 0.0;
};

struct TransientParams {
  double tau = 0.1;         // s
  double peak_ratio = 1.0;  // initial envelope / steady envelope
  double steady_amp = 1.0;  // A, peak of the steady-state sine
  double phase = 0.0;       // rad at switch-on
  double duration = 2.0;    // s
  std::vector<Oscillation> oscillations;

  void validate() const;
};

/// Turn-on current with envelope 1 + (peak_ratio - 1) * exp(-t / tau).
Waveform synth_transient(const TransientParams& params, const Mains& mains, double sample_rate);

struct ComposeOptions {
  bool keep_load_currents = true;
};

MachineRecording compose_machine(const MachineScenario& scenario, const ComposeOptions& options = {});

}  // namespace nilm
