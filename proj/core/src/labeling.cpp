#include "nilm/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "nilm/error.hpp"
#include "nilm/stats.hpp"

namespace nilm {

std::string_view to_string(PowerFactorClass c) noexcept {
  switch (c) {
    case PowerFactorClass::resistive_like: return "resistive_like";
    case PowerFactorClass::motor_like: return "motor_like";
    case PowerFactorClass::electronic_like: return "electronic_like";
  }
  return "motor_like";
}

PowerFactorClass power_factor_label(double power_factor, double thd, const PowerFactorThresholds& t) {
  if (thd > t.electronic_min_thd) return PowerFactorClass::electronic_like;
  if (power_factor >= t.resistive_min_pf) return PowerFactorClass::resistive_like;
  return PowerFactorClass::motor_like;
}

PowerFactorClass power_factor_label(std::span<const PeriodFeatures> on_interval, const PowerFactorThresholds& t) {
  if (on_interval.size() < 10) {
    std::ostringstream os;
    os << "power factor label needs 10 periods, got " << on_interval.size();
    fail(ErrorCode::InsufficientData, os.str());
  }
  std::vector<double> pf, thd;
  for (const auto& f : on_interval) {
    pf.push_back(f.power_factor());
    thd.push_back(f.thd());
  }
  return power_factor_label(stats::median(pf), stats::median(thd), t);
}

const std::vector<std::string>& transient_feature_names() {
  static const std::vector<std::string> names{
      "decay_constant_s", "peak_to_steady",   "peak_abs_current", "settle_time_s",  "overshoot_count",
      "thd_first_period", "thd_first_5",      "thd_steady",       "h2_early",       "h3_early",
      "h5_early",         "h7_early",         "excess_energy",    "envelope_ratio_2", "envelope_ratio_5",
      "dc_offset_early",  "rms_first_10",     "oscillation_hz",
  };
  return names;
}

double TransientFeatureVector::get(std::string_view name) const {
  const auto& names = transient_feature_names();
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end() || values.size() != names.size()) {
    fail(ErrorCode::InvalidArgument, "unknown transient feature " + std::string(name));
  }
  return values[static_cast<std::size_t>(it - names.begin())];
}

namespace {

constexpr std::size_t kThdHarmonics = 20;
constexpr std::size_t kEarlyPeriods = 3;

struct BlockSpectrum {
  double fundamental = 0.0;
  double thd = 0.0;
  std::vector<double> magnitude;  // index h - 1
};

}  // namespace

TransientFeatureVector extract_transient_features(const Waveform& transient, double steady_amp,
                                                  const TransientOptions& options) {
  transient.validate();
  if (!(steady_amp > 0.0)) fail(ErrorCode::InvalidArgument, "steady_amp must be positive");
  if (!(options.mains_frequency > 0.0)) fail(ErrorCode::InvalidArgument, "mains frequency must be positive");
  const auto N = static_cast<std::size_t>(std::llround(transient.sample_rate / options.mains_frequency));
  const std::size_t H = std::min(kThdHarmonics, N / 2 > 0 ? N / 2 - 1 : 0);
  if (N < 8 || H < 7) fail(ErrorCode::InvalidArgument, "sample rate too low for transient features");
  const std::size_t P = transient.size() / N;
  if (P < options.min_settled_periods + 1) {
    fail(ErrorCode::NoSteadyState, "transient shorter than the settled span it must contain");
  }
  const double T = static_cast<double>(N) / transient.sample_rate;

  std::vector<double> x(transient.samples.begin(), transient.samples.end());
  for (double& v : x) v /= steady_amp;

  std::vector<double> ct(N), st(N);
  for (std::size_t j = 0; j < N; ++j) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(N);
    ct[j] = std::cos(a);
    st[j] = std::sin(a);
  }
  std::vector<BlockSpectrum> blocks(P);
  for (std::size_t k = 0; k < P; ++k) {
    auto& b = blocks[k];
    b.magnitude.resize(H);
    double harm = 0.0;
    for (std::size_t h = 1; h <= H; ++h) {
      std::complex<double> acc{};
      for (std::size_t j = 0; j < N; ++j) {
        const std::size_t idx = (h * j) % N;
        acc += x[k * N + j] * std::complex<double>(ct[idx], -st[idx]);
      }
      b.magnitude[h - 1] = 2.0 * std::abs(acc) / static_cast<double>(N);
      if (h >= 2) harm += b.magnitude[h - 1] * b.magnitude[h - 1];
    }
    b.fundamental = b.magnitude[0];
    b.thd = b.fundamental > 1e-12 ? std::sqrt(harm) / b.fundamental : 0.0;
  }

  const double band = options.settle_band;
  std::size_t settle = P;
  for (std::size_t k = P; k-- > 0;) {
    if (std::abs(blocks[k].fundamental - 1.0) > band) break;
    settle = k;
  }
  if (settle == P || P - settle < options.min_settled_periods) {
    std::ostringstream os;
    os << "envelope does not stay within " << band * 100.0 << " % for " << options.min_settled_periods
       << " periods";
    fail(ErrorCode::NoSteadyState, os.str());
  }

  std::vector<double> t, ld;
  for (std::size_t k = 0; k < P; ++k) {
    const double d = blocks[k].fundamental - 1.0;
    if (d <= 0.01) break;
    t.push_back((static_cast<double>(k) + 0.5) * T);
    ld.push_back(std::log(d));
  }
  double tau = 0.0;
  if (t.size() >= 3) {
    const auto fit = stats::fit_line(t, ld);
    if (fit.slope < 0.0) tau = -1.0 / fit.slope;
  }

  double peak_env = 0.0, peak_abs = 0.0, excess = 0.0;
  for (const auto& b : blocks) {
    peak_env = std::max(peak_env, b.fundamental);
    excess += 0.5 * (b.fundamental * b.fundamental - 1.0) * T;
  }
  for (std::size_t n = 0; n < P * N; ++n) peak_abs = std::max(peak_abs, std::abs(x[n]));

  double overshoots = 0.0;
  for (std::size_t k = 1; k + 1 < P; ++k) {
    const double a = blocks[k].fundamental;
    if (a > blocks[k - 1].fundamental && a >= blocks[k + 1].fundamental && a - 1.0 > 0.2 * band) overshoots += 1.0;
  }

  const auto mean_over = [&](std::size_t from, std::size_t to, auto&& get) {
    double s = 0.0;
    for (std::size_t k = from; k < to; ++k) s += get(blocks[k]);
    return s / static_cast<double>(to - from);
  };
  const std::size_t early = std::min(kEarlyPeriods, P);
  const auto early_h = [&](std::size_t h) {
    return mean_over(0, early, [h](const BlockSpectrum& b) { return b.magnitude[h - 1]; });
  };

  double dc = 0.0;
  for (std::size_t j = 0; j < N; ++j) dc += x[j];
  dc /= static_cast<double>(N);
  const std::size_t rms_n = std::min<std::size_t>(10, P) * N;
  double sq = 0.0;
  for (std::size_t n = 0; n < rms_n; ++n) sq += x[n] * x[n];

  // Low-frequency oscillation riding on the current, seen in the per-period
  // mean; frequency from its zero crossings while it is above 10 % of its peak.
  double osc_hz = 0.0;
  {
    std::vector<double> m(P);
    double amax = 0.0;
    for (std::size_t k = 0; k < P; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < N; ++j) s += x[k * N + j];
      m[k] = s / static_cast<double>(N);
      amax = std::max(amax, std::abs(m[k]));
    }
    if (amax > 1e-3) {
      std::size_t last = 0;
      for (std::size_t k = 0; k < P; ++k) {
        if (std::abs(m[k]) >= 0.1 * amax) last = k;
      }
      std::vector<double> crossings;
      for (std::size_t k = 0; k < last; ++k) {
        if ((m[k] < 0.0) != (m[k + 1] < 0.0)) {
          crossings.push_back((static_cast<double>(k) + m[k] / (m[k] - m[k + 1])) * T);
        }
      }
      if (crossings.size() >= 2) {
        osc_hz = static_cast<double>(crossings.size() - 1) / (2.0 * (crossings.back() - crossings.front()));
      }
    }
  }

  const double a0 = blocks[0].fundamental > 1e-12 ? blocks[0].fundamental : 1e-12;
  TransientFeatureVector out;
  out.values = {
      tau,
      peak_env,
      peak_abs,
      static_cast<double>(settle) * T,
      overshoots,
      blocks[0].thd,
      mean_over(0, std::min<std::size_t>(5, P), [](const BlockSpectrum& b) { return b.thd; }),
      mean_over(P - options.min_settled_periods, P, [](const BlockSpectrum& b) { return b.thd; }),
      early_h(2),
      early_h(3),
      early_h(5),
      early_h(7),
      excess,
      blocks[1].fundamental / a0,
      blocks[std::min<std::size_t>(4, P - 1)].fundamental / a0,
      dc,
      std::sqrt(sq / static_cast<double>(rms_n)),
      osc_hz,
  };
  for (double v : out.values) {
    if (!std::isfinite(v)) fail(ErrorCode::InvalidArgument, "non-finite transient feature");
  }
  return out;
}

FingerprintModel train_fingerprint(std::span<const LabeledFeatures> samples, std::vector<std::string>* warnings) {
  const auto& names = transient_feature_names();
  const std::size_t F = names.size();
  std::map<std::string, std::vector<const LabeledFeatures*>> by_class;
  for (const auto& s : samples) {
    if (s.features.values.size() != F) fail(ErrorCode::InvalidArgument, "feature vector has the wrong length");
    by_class[s.label].push_back(&s);
  }
  if (by_class.empty()) fail(ErrorCode::ClassTooSmall, "no training samples");
  for (const auto& [label, members] : by_class) {
    if (members.size() < 2) {
      fail(ErrorCode::ClassTooSmall, "class '" + label + "' has " + std::to_string(members.size()) + " sample(s)");
    }
  }
  if (warnings) {
    std::set<std::pair<std::string, std::string>> reported;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      for (std::size_t j = i + 1; j < samples.size(); ++j) {
        if (samples[i].label == samples[j].label || samples[i].features.values != samples[j].features.values) continue;
        auto key = std::minmax(samples[i].label, samples[j].label);
        if (reported.insert({key.first, key.second}).second) {
          warnings->push_back("ClassCollision: identical samples labelled '" + key.first + "' and '" + key.second +
                              "'");
        }
      }
    }
  }

  FingerprintModel m;
  m.feature_names = names;
  m.offset.assign(F, 0.0);
  m.scale.assign(F, 1.0);
  const auto n = static_cast<double>(samples.size());
  for (const auto& s : samples) {
    for (std::size_t f = 0; f < F; ++f) m.offset[f] += s.features.values[f] / n;
  }
  // Pooled within-class spread, so features that scatter inside a class
  // (switch-on phase, noise) weigh less than those separating classes.
  for (std::size_t f = 0; f < F; ++f) {
    double var = 0.0;
    for (const auto& [label, members] : by_class) {
      double mu = 0.0;
      for (const auto* s : members) mu += s->features.values[f] / static_cast<double>(members.size());
      for (const auto* s : members) var += std::pow(s->features.values[f] - mu, 2);
    }
    const double sd = std::sqrt(var / std::max(1.0, n - static_cast<double>(by_class.size())));
    m.scale[f] = sd > 1e-12 * std::max(1.0, std::abs(m.offset[f])) ? sd : 1.0;
  }
  for (const auto& [label, members] : by_class) {
    std::vector<double> c(F, 0.0);
    for (const auto* s : members) {
      for (std::size_t f = 0; f < F; ++f) {
        c[f] += (s->features.values[f] - m.offset[f]) / m.scale[f] / static_cast<double>(members.size());
      }
    }
    m.classes.push_back(label);
    m.centroids.push_back(std::move(c));
  }
  return m;
}

FingerprintMatch classify_fingerprint(const FingerprintModel& model, const TransientFeatureVector& features) {
  const std::size_t F = model.feature_names.size();
  if (model.classes.empty() || model.centroids.size() != model.classes.size()) {
    fail(ErrorCode::InvalidArgument, "fingerprint model has no classes");
  }
  if (features.values.size() != F || model.offset.size() != F || model.scale.size() != F) {
    fail(ErrorCode::InvalidArgument, "feature vector does not match the model");
  }
  std::vector<double> z(F);
  for (std::size_t f = 0; f < F; ++f) z[f] = (features.values[f] - model.offset[f]) / model.scale[f];
  double d1 = std::numeric_limits<double>::infinity(), d2 = d1;
  std::size_t best = 0;
  for (std::size_t c = 0; c < model.classes.size(); ++c) {
    double d = 0.0;
    for (std::size_t f = 0; f < F; ++f) d += std::pow(z[f] - model.centroids[c][f], 2);
    d = std::sqrt(d);
    if (d < d1) {
      d2 = d1;
      d1 = d;
      best = c;
    } else if (d < d2) {
      d2 = d;
    }
  }
  FingerprintMatch out;
  out.label = model.classes[best];
  out.distance = d1;
  if (!std::isfinite(d2)) {
    out.confidence = std::numeric_limits<double>::infinity();
  } else if (d1 > 0.0) {
    out.confidence = d2 / d1;
  } else {
    out.confidence = d2 > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  }
  out.low_confidence = out.confidence < kLowConfidenceRatio;
  return out;
}

double macro_f1(std::span<const std::string> truth, std::span<const std::string> predicted) {
  if (truth.size() != predicted.size()) fail(ErrorCode::LengthMismatch, "label lists differ in length");
  if (truth.empty()) fail(ErrorCode::InvalidArgument, "no labels to score");
  const std::set<std::string> classes(truth.begin(), truth.end());
  double sum = 0.0;
  for (const auto& c : classes) {
    double tp = 0.0, fp = 0.0, fn = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const bool t = truth[i] == c, p = predicted[i] == c;
      tp += (t && p) ? 1.0 : 0.0;
      fp += (!t && p) ? 1.0 : 0.0;
      fn += (t && !p) ? 1.0 : 0.0;
    }
    sum += 2.0 * tp / (2.0 * tp + fp + fn);
  }
  return sum / static_cast<double>(classes.size());
}

}  // namespace nilm
