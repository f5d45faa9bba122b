#include "nilm/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "nilm/error.hpp"
#include "nilm/stats.hpp"

namespace nilm {

void Waveform::validate() const {
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) {
    fail(ErrorCode::InvalidArgument, "sample_rate must be positive");
  }
  for (std::size_t n = 0; n < samples.size(); ++n) {
    if (!std::isfinite(samples[n])) {
      std::ostringstream os;
      os << "non-finite sample at index " << n;
      fail(ErrorCode::InvalidArgument, os.str());
    }
  }
}

double PeriodFeatures::thd() const noexcept {
  if (harmonics.empty()) return 0.0;
  const double fundamental = std::abs(harmonics.front());
  if (fundamental <= 1e-12) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 1; k < harmonics.size(); ++k) sum += std::norm(harmonics[k]);
  return std::sqrt(sum) / fundamental;
}

std::vector<double> segment_periods(const Waveform& voltage, double nominal_freq) {
  voltage.validate();
  if (voltage.kind != SignalKind::voltage) {
    fail(ErrorCode::InvalidArgument, "segment_periods expects a voltage waveform");
  }
  if (!(nominal_freq > 0.0)) fail(ErrorCode::InvalidArgument, "nominal frequency must be positive");
  const double nominal_len = voltage.sample_rate / nominal_freq;
  if (static_cast<double>(voltage.size()) < 2.0 * nominal_len) {
    fail(ErrorCode::InvalidArgument, "voltage must span at least two nominal periods");
  }

  const double offset = stats::mean(voltage.samples);
  const auto& x = voltage.samples;
  std::vector<double> boundaries;
  bool any_sign_change = false;
  for (std::size_t n = 0; n + 1 < x.size(); ++n) {
    const double a = x[n] - offset;
    const double b = x[n + 1] - offset;
    if ((a < 0.0) != (b < 0.0)) any_sign_change = true;
    if (!(a <= 0.0 && b > 0.0)) continue;
    const double pos = static_cast<double>(n) + (-a) / (b - a);
    // Ignore re-crossings closer than half a period (ripple near zero).
    if (!boundaries.empty() && pos - boundaries.back() < 0.5 * nominal_len) continue;
    boundaries.push_back(pos);
  }
  if (!any_sign_change || boundaries.empty()) {
    fail(ErrorCode::NoZeroCrossings, "voltage has no positive-going zero crossings");
  }
  if (boundaries.size() < 2) {
    fail(ErrorCode::FrequencyOutOfRange, "fewer than two zero crossings over two nominal periods");
  }
  for (std::size_t k = 1; k < boundaries.size(); ++k) {
    const double spacing = boundaries[k] - boundaries[k - 1];
    if (std::abs(spacing - nominal_len) > 0.10 * nominal_len) {
      std::ostringstream os;
      os << "period " << k - 1 << " spans " << spacing << " samples, nominal " << nominal_len;
      fail(ErrorCode::FrequencyOutOfRange, os.str());
    }
  }
  return boundaries;
}

std::vector<SampleRange> period_ranges(std::span<const double> boundaries) {
  std::vector<SampleRange> out;
  if (boundaries.size() < 2) return out;
  out.reserve(boundaries.size() - 1);
  for (std::size_t k = 0; k + 1 < boundaries.size(); ++k) {
    const auto b = static_cast<std::size_t>(std::llround(std::max(0.0, boundaries[k])));
    const auto e = static_cast<std::size_t>(std::llround(std::max(0.0, boundaries[k + 1])));
    out.push_back({b, e});
  }
  return out;
}

namespace {

double sample_at(std::span<const double> x, double pos) {
  if (pos <= 0.0) return x.front();
  const auto i0 = static_cast<std::size_t>(pos);
  if (i0 + 1 >= x.size()) return x.back();
  const double f = pos - static_cast<double>(i0);
  if (f == 0.0) return x[i0];
  return x[i0] + f * (x[i0 + 1] - x[i0]);
}

}  // namespace

std::vector<PeriodFeatures> compute_period_features(const Waveform& current,
                                                    const Waveform& voltage,
                                                    std::span<const double> boundaries,
                                                    std::size_t harmonic_count) {
  if (current.size() != voltage.size() || current.sample_rate != voltage.sample_rate) {
    fail(ErrorCode::LengthMismatch, "current and voltage must share length and sample rate");
  }
  if (harmonic_count < 1) fail(ErrorCode::InvalidArgument, "harmonic count must be >= 1");
  if (current.samples.empty()) fail(ErrorCode::InvalidArgument, "empty waveform");

  const std::size_t grid = std::max(kPeriodGridPoints, 2 * (harmonic_count + 1));
  std::vector<double> cos_table(grid), sin_table(grid);
  for (std::size_t j = 0; j < grid; ++j) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(grid);
    cos_table[j] = std::cos(a);
    sin_table[j] = std::sin(a);
  }

  std::vector<PeriodFeatures> out;
  if (boundaries.size() < 2) return out;
  out.reserve(boundaries.size() - 1);
  std::vector<double> ig(grid), vg(grid);
  const double min_len = 2.0 * static_cast<double>(harmonic_count + 1);

  for (std::size_t k = 0; k + 1 < boundaries.size(); ++k) {
    const double b0 = boundaries[k];
    const double len = boundaries[k + 1] - b0;
    if (len < min_len) {
      std::ostringstream os;
      os << "period " << k << " holds " << len << " samples, need " << min_len;
      fail(ErrorCode::PeriodTooShort, os.str());
    }
    const double step = len / static_cast<double>(grid);
    double pv = 0.0, ii = 0.0, vv = 0.0;
    for (std::size_t j = 0; j < grid; ++j) {
      const double pos = b0 + static_cast<double>(j) * step;
      ig[j] = sample_at(current.samples, pos);
      vg[j] = sample_at(voltage.samples, pos);
      pv += ig[j] * vg[j];
      ii += ig[j] * ig[j];
      vv += vg[j] * vg[j];
    }
    const double inv = 1.0 / static_cast<double>(grid);

    PeriodFeatures f;
    f.period_index = k;
    f.t_start = current.start_time + b0 / current.sample_rate;
    f.duration = len / current.sample_rate;
    f.p = pv * inv;
    f.i_rms = std::sqrt(ii * inv);
    f.v_rms = std::sqrt(vv * inv);
    f.s = f.i_rms * f.v_rms;
    f.harmonics.resize(harmonic_count);
    for (std::size_t h = 1; h <= harmonic_count; ++h) {
      double re = 0.0, im = 0.0;
      for (std::size_t j = 0; j < grid; ++j) {
        const std::size_t idx = (h * j) % grid;
        re += ig[j] * cos_table[idx];
        im -= ig[j] * sin_table[idx];
      }
      f.harmonics[h - 1] = {2.0 * re * inv, 2.0 * im * inv};
    }
    double vre = 0.0, vim = 0.0;
    for (std::size_t j = 0; j < grid; ++j) {
      vre += vg[j] * cos_table[j];
      vim -= vg[j] * sin_table[j];
    }
    f.v1 = {2.0 * vre * inv, 2.0 * vim * inv};
    const auto& i1 = f.harmonics.front();
    f.q = 0.5 * std::abs(f.v1) * std::abs(i1) * std::sin(std::arg(f.v1) - std::arg(i1));
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<double> active_power(std::span<const PeriodFeatures> features) {
  std::vector<double> out;
  out.reserve(features.size());
  for (const auto& f : features) out.push_back(f.p);
  return out;
}

std::vector<double> reactive_power(std::span<const PeriodFeatures> features) {
  std::vector<double> out;
  out.reserve(features.size());
  for (const auto& f : features) out.push_back(f.q);
  return out;
}

std::vector<double> harmonic_magnitudes(std::span<const PeriodFeatures> features, std::size_t k) {
  std::vector<double> out;
  out.reserve(features.size());
  for (const auto& f : features) out.push_back(f.harmonic_magnitude(k));
  return out;
}

}  // namespace nilm
