#pragma once

#include "nilm/signal.hpp"

namespace nilm {

/// First-order low-pass response of a current clamp,
/// |H(f)| = v0 / sqrt(1 + (f / f_cut)^2).
struct SensorModel {
  double v0 = 1.0;
  double f_cut = 30'000.0;  // Hz

  void validate() const;
  [[nodiscard]] double gain_at(double frequency) const noexcept;
};

/// Filters `w` through the sensor response in the frequency domain
/// (H(f) = v0 / (1 + j f / f_cut)); the record is treated as periodic.
Waveform apply_sensor_model(const Waveform& w, const SensorModel& model);

}  // namespace nilm
