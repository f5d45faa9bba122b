#include "nilm/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "nilm/error.hpp"

namespace nilm {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::InvalidArgument, what);
}

std::size_t sample_count_for(double sample_rate, double duration) {
  require(sample_rate > 0.0, "sample_rate must be positive");
  require(duration >= 0.0, "duration must be non-negative");
  return static_cast<std::size_t>(std::llround(duration * sample_rate));
}

Waveform make_current(double sample_rate, std::size_t n) {
  Waveform w;
  w.samples.assign(n, 0.0);
  w.sample_rate = sample_rate;
  w.kind = SignalKind::current;
  return w;
}

double theta_at(const Mains& mains, double sample_rate, std::size_t n) {
  return kTwoPi * mains.frequency * static_cast<double>(n) / sample_rate;
}

}  // namespace

std::string_view to_string(LoadClass c) noexcept {
  switch (c) {
    case LoadClass::two_state: return "two_state";
    case LoadClass::ubr_single_phase: return "ubr_single_phase";
    case LoadClass::ubr_three_phase: return "ubr_three_phase";
    case LoadClass::fsm_varying: return "fsm_varying";
    case LoadClass::linear_sine: return "linear_sine";
  }
  return "unknown";
}

std::optional<LoadClass> load_class_from_string(std::string_view s) noexcept {
  for (auto c : {LoadClass::two_state, LoadClass::ubr_single_phase, LoadClass::ubr_three_phase,
                 LoadClass::fsm_varying, LoadClass::linear_sine}) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

void validate_schedule(const Schedule& schedule) {
  double last_off = -std::numeric_limits<double>::infinity();
  for (const auto& iv : schedule) {
    require(std::isfinite(iv.t_on) && std::isfinite(iv.t_off), "schedule times must be finite");
    require(iv.t_on < iv.t_off, "schedule interval must have t_on < t_off");
    require(iv.t_on >= last_off, "schedule intervals must be increasing and non-overlapping");
    last_off = iv.t_off;
  }
}

std::vector<bool> schedule_mask(const Schedule& schedule, double sample_rate, std::size_t samples) {
  if (schedule.empty()) return std::vector<bool>(samples, true);
  std::vector<bool> mask(samples, false);
  const auto to_index = [&](double t) {
    const double x = std::ceil(t * sample_rate - 1e-9);
    return static_cast<std::size_t>(std::clamp(x, 0.0, static_cast<double>(samples)));
  };
  for (const auto& iv : schedule) {
    const std::size_t a = to_index(iv.t_on);
    const std::size_t b = to_index(iv.t_off);
    for (std::size_t n = a; n < b; ++n) mask[n] = true;
  }
  return mask;
}

double Profile::at(double t) const noexcept {
  if (points.empty()) return 1.0;
  if (t <= points.front().first) return points.front().second;
  if (t >= points.back().first) return points.back().second;
  const auto it = std::upper_bound(points.begin(), points.end(), t,
                                   [](double v, const auto& p) { return v < p.first; });
  const auto& [t1, v1] = *it;
  const auto& [t0, v0] = *(it - 1);
  if (t1 <= t0) return v1;
  return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
}

double Profile::min_value() const noexcept {
  if (points.empty()) return 1.0;
  double m = points.front().second;
  for (const auto& p : points) m = std::min(m, p.second);
  return m;
}

double Profile::max_value() const noexcept {
  if (points.empty()) return 1.0;
  double m = points.front().second;
  for (const auto& p : points) m = std::max(m, p.second);
  return m;
}

void TwoStateParams::validate() const {
  require(p_on >= 0.0, "two_state p_on must be >= 0");
  require(power_factor > 0.0 && power_factor <= 1.0, "two_state power_factor must lie in (0, 1]");
  for (const auto& h : harmonics) require(h.order >= 1, "harmonic order must be >= 1");
}

void UbrParams::validate(LoadClass kind) const {
  require(p_mean >= 0.0, "ubr p_mean must be >= 0");
  const double max_angle = kind == LoadClass::ubr_three_phase ? std::numbers::pi / 3.0 : std::numbers::pi / 2.0;
  require(kind == LoadClass::ubr_three_phase || kind == LoadClass::ubr_single_phase,
          "ubr kind must be single or three phase");
  require(conduction_angle > 0.0 && conduction_angle <= max_angle + 1e-12,
          "ubr conduction angle outside the admissible range");
  require(power_profile.empty() || power_profile.min_value() >= 0.0, "ubr power profile must be >= 0");
}

void FsmVaryingParams::validate() const {
  require(coupling_slope != 0.0, "fsm coupling_slope must be non-zero");
  require(coupling_harmonic >= 2, "fsm coupling harmonic must be >= 2");
  require(p_min >= 0.0 && p_max >= p_min, "fsm bounds must satisfy 0 <= p_min <= p_max");
  require(step_dp >= 0.0, "fsm step_dp must be >= 0");
  require(p_profile.empty() || p_profile.min_value() >= 0.0, "fsm profile must be >= 0");
  require(knot_interval > 0.0, "fsm knot interval must be positive");
}

double FsmVaryingParams::power_factor() const noexcept {
  const double s = std::hypot(step_dp, step_dq);
  return s > 0.0 ? step_dp / s : 1.0;
}

void LinearParams::validate() const {
  for (const auto& t : terms) {
    require(t.order >= 1, "linear term order must be >= 1");
    require(t.amplitude >= 0.0, "linear term amplitude must be >= 0");
  }
}

void LoadModel::validate() const {
  require(!id.empty(), "load id must not be empty");
  validate_schedule(schedule);
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, TwoStateParams>) {
          require(load_class == LoadClass::two_state, "load " + id + ": params do not match class");
          p.validate();
        } else if constexpr (std::is_same_v<T, UbrParams>) {
          p.validate(load_class);
        } else if constexpr (std::is_same_v<T, FsmVaryingParams>) {
          require(load_class == LoadClass::fsm_varying, "load " + id + ": params do not match class");
          p.validate();
        } else {
          require(load_class == LoadClass::linear_sine, "load " + id + ": params do not match class");
          p.validate();
        }
      },
      params);
}

void MachineScenario::validate() const {
  require(mains.v_rms > 0.0 && mains.frequency > 0.0, "mains must have positive voltage and frequency");
  require(sample_rate > 0.0, "sample_rate must be positive");
  require(duration > 0.0, "duration must be positive");
  require(noise_rms >= 0.0 && noise_rel >= 0.0, "noise levels must be >= 0");
  // 10 kHz for one hour of a dozen loads is the practical ceiling.
  require(duration * sample_rate <= 1e9, "scenario exceeds the sample budget");
  if (sensor) sensor->validate();
  for (const auto& l : loads) l.validate();
}

std::size_t MachineScenario::sample_count() const noexcept {
  return static_cast<std::size_t>(std::llround(duration * sample_rate));
}

std::vector<std::pair<std::string, std::vector<double>>> GroundTruth::group_series() const {
  std::vector<std::pair<std::string, std::vector<double>>> out;
  for (const auto& l : loads) {
    const auto& name = l.group.empty() ? l.id : l.group;
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& g) { return g.first == name; });
    if (it == out.end()) {
      out.emplace_back(name, l.p_series);
    } else {
      for (std::size_t k = 0; k < l.p_series.size(); ++k) it->second[k] += l.p_series[k];
    }
  }
  return out;
}

Waveform mains_voltage(const Mains& mains, double sample_rate, double duration) {
  const std::size_t n = sample_count_for(sample_rate, duration);
  Waveform v;
  v.sample_rate = sample_rate;
  v.kind = SignalKind::voltage;
  v.samples.resize(n);
  const double peak = std::numbers::sqrt2 * mains.v_rms;
  for (std::size_t i = 0; i < n; ++i) v.samples[i] = peak * std::sin(theta_at(mains, sample_rate, i));
  return v;
}

Waveform synth_two_state(const TwoStateParams& params, const Schedule& schedule, const Mains& mains,
                         double sample_rate, double duration) {
  params.validate();
  validate_schedule(schedule);
  const std::size_t n = sample_count_for(sample_rate, duration);
  Waveform w = make_current(sample_rate, n);
  const auto mask = schedule_mask(schedule, sample_rate, n);
  const double amp = std::numbers::sqrt2 * params.p_on / (params.power_factor * mains.v_rms);
  const double lag = std::acos(params.power_factor);
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const double th = theta_at(mains, sample_rate, i);
    double v = amp * std::sin(th - lag);
    for (const auto& h : params.harmonics) {
      v += amp * h.amplitude * std::cos(h.order * th + h.phase);
    }
    w.samples[i] = v;
  }
  return w;
}

namespace {

struct PulseCenter {
  double angle;
  double sign;
};

std::vector<PulseCenter> pulse_centers(LoadClass kind) {
  constexpr double pi = std::numbers::pi;
  if (kind == LoadClass::ubr_single_phase) return {{pi / 2.0, 1.0}, {3.0 * pi / 2.0, -1.0}};
  // Line current of a six-pulse bridge: two conduction humps per half-cycle,
  // at the peaks of the two line-to-line voltages involving this conductor.
  return {{pi / 3.0, 1.0}, {2.0 * pi / 3.0, 1.0}, {4.0 * pi / 3.0, -1.0}, {5.0 * pi / 3.0, -1.0}};
}

}  // namespace

double ubr_unit_power(LoadClass kind, double conduction_angle, const Mains& mains) {
  const double h = 0.5 * conduction_angle;
  const double shape = (h - 0.5 * std::sin(2.0 * h)) / (1.0 - std::cos(h));
  const double base = std::numbers::sqrt2 * mains.v_rms * shape / std::numbers::pi;
  return kind == LoadClass::ubr_three_phase ? 2.0 * std::sin(std::numbers::pi / 3.0) * base : base;
}

Waveform synth_ubr(const UbrParams& params, LoadClass kind, const Schedule& schedule, const Mains& mains,
                   double sample_rate, double duration) {
  params.validate(kind);
  validate_schedule(schedule);
  const std::size_t n = sample_count_for(sample_rate, duration);
  Waveform w = make_current(sample_rate, n);
  const auto mask = schedule_mask(schedule, sample_rate, n);
  const auto centers = pulse_centers(kind);
  const double h = 0.5 * params.conduction_angle;
  const double cos_h = std::cos(h);
  const double unit = ubr_unit_power(kind, params.conduction_angle, mains);
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const double th = std::fmod(theta_at(mains, sample_rate, i), kTwoPi);
    for (const auto& c : centers) {
      const double d = th - c.angle;
      if (std::abs(d) >= h) continue;
      const double t = static_cast<double>(i) / sample_rate;
      const double amp = params.p_mean * params.power_profile.at(t) / unit;
      // Cosine cap lifted to zero at the window edges: continuous value,
      // slope step at conduction onset and end.
      w.samples[i] = c.sign * amp * (std::cos(d) - cos_h) / (1.0 - cos_h);
    }
  }
  return w;
}

Waveform synth_fsm_varying(const FsmVaryingParams& params, const Schedule& schedule, const Mains& mains,
                           double sample_rate, double duration) {
  params.validate();
  validate_schedule(schedule);
  require(!params.p_profile.empty(), "fsm profile must be defined before synthesis");
  const std::size_t n = sample_count_for(sample_rate, duration);
  Waveform w = make_current(sample_rate, n);
  const auto mask = schedule_mask(schedule, sample_rate, n);
  const double pf = params.power_factor();
  const double lag = std::acos(pf);
  const double gain = std::numbers::sqrt2 / (pf * mains.v_rms);
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const double t = static_cast<double>(i) / sample_rate;
    const double th = theta_at(mains, sample_rate, i);
    const double p = params.p_profile.at(t);
    const double coupled = params.coupling_slope * p + params.coupling_intercept;
    w.samples[i] = gain * p * std::sin(th - lag) +
                   coupled * std::cos(params.coupling_harmonic * th + params.coupling_phase);
  }
  return w;
}

Waveform synth_linear(const LinearParams& params, const Schedule& schedule, const Mains& mains,
                      double sample_rate, double duration) {
  params.validate();
  validate_schedule(schedule);
  const std::size_t n = sample_count_for(sample_rate, duration);
  Waveform w = make_current(sample_rate, n);
  const auto mask = schedule_mask(schedule, sample_rate, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const double th = theta_at(mains, sample_rate, i);
    double v = 0.0;
    for (const auto& t : params.terms) v += t.amplitude * std::cos(t.order * th + t.phase);
    w.samples[i] = v;
  }
  return w;
}

Profile random_walk_profile(double start, double lo, double hi, double duration, double knot_interval,
                            double step_sigma, std::mt19937_64& rng) {
  require(hi >= lo, "random walk bounds must satisfy lo <= hi");
  require(knot_interval > 0.0, "knot interval must be positive");
  std::normal_distribution<double> step(0.0, step_sigma);
  const auto knots = static_cast<std::size_t>(std::ceil(duration / knot_interval)) + 1;
  std::vector<double> values;
  values.reserve(knots);
  double v = std::clamp(start, lo, hi);
  for (std::size_t k = 0; k < knots; ++k) {
    values.push_back(v);
    v += step_sigma > 0.0 ? step(rng) : 0.0;
    // Reflect at the bounds, then clip whatever overshoots twice.
    if (v > hi) v = 2.0 * hi - v;
    if (v < lo) v = 2.0 * lo - v;
    v = std::clamp(v, lo, hi);
  }
  Profile prof;
  constexpr int kSub = 10;
  for (std::size_t k = 0; k + 1 < values.size(); ++k) {
    for (int j = 0; j < kSub; ++j) {
      const double u = static_cast<double>(j) / kSub;
      const double s = u * u * (3.0 - 2.0 * u);
      prof.points.emplace_back((static_cast<double>(k) + u) * knot_interval,
                               values[k] + (values[k + 1] - values[k]) * s);
    }
  }
  prof.points.emplace_back(static_cast<double>(values.size() - 1) * knot_interval, values.back());
  return prof;
}

void TransientParams::validate() const {
  require(tau > 0.0, "transient tau must be positive");
  require(peak_ratio >= 1.0, "transient peak_ratio must be >= 1");
  require(steady_amp > 0.0, "transient steady_amp must be positive");
  require(duration > 0.0, "transient duration must be positive");
  for (const auto& o : oscillations) require(o.decay > 0.0, "oscillation decay must be positive");
}

Waveform synth_transient(const TransientParams& params, const Mains& mains, double sample_rate) {
  params.validate();
  const std::size_t n = sample_count_for(sample_rate, params.duration);
  Waveform w = make_current(sample_rate, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double env = 1.0 + (params.peak_ratio - 1.0) * std::exp(-t / params.tau);
    double v = env * std::sin(theta_at(mains, sample_rate, i) + params.phase);
    for (const auto& o : params.oscillations) {
      v += o.amplitude * std::exp(-t / o.decay) * std::sin(kTwoPi * o.frequency * t + o.phase);
    }
    w.samples[i] = params.steady_amp * v;
  }
  return w;
}

MachineRecording compose_machine(const MachineScenario& scenario, const ComposeOptions& options) {
  scenario.validate();
  std::mt19937_64 rng(scenario.seed);
  const double fs = scenario.sample_rate;
  const double dur = scenario.duration;
  const std::size_t n = scenario.sample_count();

  MachineRecording rec;
  rec.voltage = mains_voltage(scenario.mains, fs, dur);
  rec.current = make_current(fs, n);
  auto& agg = rec.current.samples;

  std::vector<Waveform> currents;
  currents.reserve(scenario.loads.size());
  for (const auto& load : scenario.loads) {
    Waveform w = std::visit(
        [&](const auto& p) -> Waveform {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, TwoStateParams>) {
            return synth_two_state(p, load.schedule, scenario.mains, fs, dur);
          } else if constexpr (std::is_same_v<T, UbrParams>) {
            return synth_ubr(p, load.load_class, load.schedule, scenario.mains, fs, dur);
          } else if constexpr (std::is_same_v<T, FsmVaryingParams>) {
            if (!p.p_profile.empty()) return synth_fsm_varying(p, load.schedule, scenario.mains, fs, dur);
            FsmVaryingParams filled = p;
            filled.p_profile =
                random_walk_profile(p.p_base, p.p_min, p.p_max, dur, p.knot_interval, p.step_sigma, rng);
            return synth_fsm_varying(filled, load.schedule, scenario.mains, fs, dur);
          } else {
            return synth_linear(p, load.schedule, scenario.mains, fs, dur);
          }
        },
        load.params);
    for (std::size_t i = 0; i < n; ++i) agg[i] += w.samples[i];
    currents.push_back(std::move(w));
  }

  double sq = 0.0;
  for (double x : agg) sq += x * x;
  const double clean_rms = n > 0 ? std::sqrt(sq / static_cast<double>(n)) : 0.0;
  const double sigma = scenario.noise_rms + scenario.noise_rel * clean_rms;
  rec.truth.noise_sigma = sigma;
  rec.truth.noise.assign(n, 0.0);
  if (sigma > 0.0) {
    std::normal_distribution<double> gauss(0.0, sigma);
    for (std::size_t i = 0; i < n; ++i) rec.truth.noise[i] = gauss(rng);
  }
  for (std::size_t i = 0; i < n; ++i) agg[i] = agg[i] + rec.truth.noise[i];

  rec.truth.boundaries = segment_periods(rec.voltage, scenario.mains.frequency);
  for (std::size_t k = 0; k + 1 < rec.truth.boundaries.size(); ++k) {
    rec.truth.period_durations.push_back((rec.truth.boundaries[k + 1] - rec.truth.boundaries[k]) / fs);
  }
  for (std::size_t l = 0; l < scenario.loads.size(); ++l) {
    const auto& model = scenario.loads[l];
    LoadTruth t;
    t.id = model.id;
    t.group = model.group_name();
    t.load_class = model.load_class;
    t.p_series = active_power(compute_period_features(currents[l], rec.voltage, rec.truth.boundaries, 1));
    if (options.keep_load_currents) t.current = std::move(currents[l].samples);
    rec.truth.loads.push_back(std::move(t));
  }

  if (scenario.sensor) rec.current = apply_sensor_model(rec.current, *scenario.sensor);
  return rec;
}

}  // namespace nilm
