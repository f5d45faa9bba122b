#include "nilm/sensor.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <memory>
#include <mutex>

#include "nilm/error.hpp"

namespace nilm {

void SensorModel::validate() const {
  if (!(v0 > 0.0)) fail(ErrorCode::InvalidArgument, "sensor gain v0 must be positive");
  if (!(f_cut > 0.0)) fail(ErrorCode::InvalidArgument, "sensor cutoff must be positive");
}

double SensorModel::gain_at(double frequency) const noexcept {
  const double r = frequency / f_cut;
  return v0 / std::sqrt(1.0 + r * r);
}

namespace {

// The FFTW planner is not re-entrant; execution of distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const noexcept {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(p);
  }
};
struct BufferDeleter {
  void operator()(void* p) const noexcept { fftw_free(p); }
};

}  // namespace

Waveform apply_sensor_model(const Waveform& w, const SensorModel& model) {
  w.validate();
  model.validate();
  Waveform out = w;
  const std::size_t n = w.size();
  if (n == 0) return out;

  const std::size_t bins = n / 2 + 1;
  std::unique_ptr<double, BufferDeleter> real(fftw_alloc_real(n));
  std::unique_ptr<fftw_complex, BufferDeleter> spec(fftw_alloc_complex(bins));
  const int len = static_cast<int>(n);
  // Plans are created with FFTW_ESTIMATE, which leaves the buffers untouched.
  std::unique_ptr<fftw_plan_s, PlanDeleter> forward, backward;
  {
    std::lock_guard lock(planner_mutex());
    forward.reset(fftw_plan_dft_r2c_1d(len, real.get(), spec.get(), FFTW_ESTIMATE));
    backward.reset(fftw_plan_dft_c2r_1d(len, spec.get(), real.get(), FFTW_ESTIMATE));
  }

  std::copy(w.samples.begin(), w.samples.end(), real.get());
  fftw_execute(forward.get());
  const double df = w.sample_rate / static_cast<double>(n);
  for (std::size_t k = 0; k < bins; ++k) {
    const double f = static_cast<double>(k) * df;
    const std::complex<double> h = model.v0 / std::complex<double>(1.0, f / model.f_cut);
    const std::complex<double> x(spec.get()[k][0], spec.get()[k][1]);
    const auto y = x * h;
    spec.get()[k][0] = y.real();
    spec.get()[k][1] = y.imag();
  }
  // The Nyquist bin of an even-length real signal must stay real.
  if (n % 2 == 0) spec.get()[bins - 1][1] = 0.0;
  fftw_execute(backward.get());
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) out.samples[i] = real.get()[i] * scale;
  return out;
}

}  // namespace nilm
