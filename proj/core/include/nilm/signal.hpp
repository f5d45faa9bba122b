#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace nilm {

enum class SignalKind { current, voltage };

/// Uniformly sampled single-channel signal (amperes or volts).
struct Waveform {
  std::vector<double> samples;
  double sample_rate = 10'000.0;  // Hz
  SignalKind kind = SignalKind::current;
  double start_time = 0.0;  // s

  [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
  [[nodiscard]] double duration() const noexcept {
    return static_cast<double>(samples.size()) / sample_rate;
  }
  [[nodiscard]] double time_at(std::size_t n) const noexcept {
    return start_time + static_cast<double>(n) / sample_rate;
  }

  /// Throws InvalidArgument on a non-positive rate or non-finite samples.
  void validate() const;
};

/// Supply description: RMS voltage and frequency of the ideal mains sine.
struct Mains {
  double v_rms = 230.0;
  double frequency = 50.0;
};

using Harmonics = std::vector<std::complex<double>>;

/// Per-mains-period electrical quantities. `harmonics[k - 1]` is the
/// complex amplitude (peak, cosine reference) of current harmonic k.
struct PeriodFeatures {
  std::size_t period_index = 0;
  double t_start = 0.0;   // s
  double duration = 0.0;  // s
  double p = 0.0;         // W
  double q = 0.0;         // var, fundamental displacement only
  double s = 0.0;         // VA
  double i_rms = 0.0;
  double v_rms = 0.0;
  std::complex<double> v1{};  // voltage fundamental, same convention as harmonics
  Harmonics harmonics;

  /// |I_k| for k >= 1; 0 if k exceeds the computed harmonic count.
  [[nodiscard]] double harmonic_magnitude(std::size_t k) const noexcept {
    return (k >= 1 && k <= harmonics.size()) ? std::abs(harmonics[k - 1]) : 0.0;
  }
  /// Total harmonic distortion of the current over the computed harmonics.
  [[nodiscard]] double thd() const noexcept;
  [[nodiscard]] double power_factor() const noexcept { return s > 0.0 ? p / s : 0.0; }
};

inline constexpr std::size_t kDefaultHarmonicCount = 50;
inline constexpr std::size_t kPeriodGridPoints = 200;

/// Fractional sample positions of positive-going zero crossings of the
/// (mean-removed) voltage, linearly interpolated between bracketing samples.
std::vector<double> segment_periods(const Waveform& voltage, double nominal_freq = 50.0);

/// Integer sample range [begin, end) of period k given fractional boundaries.
struct SampleRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  [[nodiscard]] std::size_t size() const noexcept { return end - begin; }
};
std::vector<SampleRange> period_ranges(std::span<const double> boundaries);

/// One PeriodFeatures per consecutive boundary pair. Each period is
/// resampled onto a fixed grid before the DFT so that bins line up.
std::vector<PeriodFeatures> compute_period_features(const Waveform& current,
                                                    const Waveform& voltage,
                                                    std::span<const double> boundaries,
                                                    std::size_t harmonic_count = kDefaultHarmonicCount);

/// Convenience projections over a feature sequence.
std::vector<double> active_power(std::span<const PeriodFeatures> features);
std::vector<double> reactive_power(std::span<const PeriodFeatures> features);
std::vector<double> harmonic_magnitudes(std::span<const PeriodFeatures> features, std::size_t k);

}  // namespace nilm
