#include "support/oracles.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace nilm::testing {

std::complex<double> naive_dft(std::span<const double> period, int k) {
  const auto n = static_cast<double>(period.size());
  long double re = 0.0L;
  long double im = 0.0L;
  for (std::size_t j = 0; j < period.size(); ++j) {
    const double a = -2.0 * std::numbers::pi * k * static_cast<double>(j) / n;
    re += period[j] * std::cos(a);
    im += period[j] * std::sin(a);
  }
  return {static_cast<double>(2.0L * re / n), static_cast<double>(2.0L * im / n)};
}

double naive_energy_j(std::span<const double> v, std::span<const double> i, double sample_rate) {
  long double sum = 0.0L;
  for (std::size_t n = 0; n < v.size() && n < i.size(); ++n) sum += static_cast<long double>(v[n]) * i[n];
  return static_cast<double>(sum / sample_rate);
}

double naive_pearson(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<long double>(x.size());
  long double sx = 0, sy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sx += x[k];
    sy += y[k];
  }
  const long double mx = sx / n, my = sy / n;
  long double cxy = 0, cxx = 0, cyy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    cxy += (x[k] - mx) * (y[k] - my);
    cxx += (x[k] - mx) * (x[k] - mx);
    cyy += (y[k] - my) * (y[k] - my);
  }
  if (cxx == 0 || cyy == 0) return 0.0;
  return static_cast<double>(cxy / std::sqrt(cxx * cyy));
}

NaiveLine naive_ols(std::span<const double> x, std::span<const double> y) {
  // Normal equations [n sx; sx sxx] [b; a] = [sy; sxy], Cramer's rule.
  long double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    n += 1;
    sx += x[k];
    sy += y[k];
    sxx += static_cast<long double>(x[k]) * x[k];
    sxy += static_cast<long double>(x[k]) * y[k];
  }
  const long double det = n * sxx - sx * sx;
  if (det == 0) throw std::invalid_argument("degenerate x");
  return {static_cast<double>((n * sxy - sx * sy) / det), static_cast<double>((sy * sxx - sx * sxy) / det)};
}

double lowpass_gain(double v0, double f_cut, double f) { return v0 / std::sqrt(1.0 + (f / f_cut) * (f / f_cut)); }

double tone_amplitude(std::span<const double> x, double sample_rate, double f) {
  // 2x2 least squares on [sin cos].
  long double ss = 0, cc = 0, sc = 0, xs = 0, xc = 0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double w = 2.0 * std::numbers::pi * f * static_cast<double>(n) / sample_rate;
    const double s = std::sin(w), c = std::cos(w);
    ss += s * s;
    cc += c * c;
    sc += s * c;
    xs += x[n] * s;
    xc += x[n] * c;
  }
  const long double det = ss * cc - sc * sc;
  const long double a = (xs * cc - xc * sc) / det;
  const long double b = (xc * ss - xs * sc) / det;
  return static_cast<double>(std::sqrt(a * a + b * b));
}

double loglinear_tau(std::span<const double> t, std::span<const double> env) {
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (env[k] - 1.0 <= 1e-9) continue;
    xs.push_back(t[k]);
    ys.push_back(std::log(env[k] - 1.0));
  }
  const auto fit = naive_ols(xs, ys);
  return -1.0 / fit.slope;
}

double bisect(const std::function<double(double)>& f, double a, double b, double tol) {
  double fa = f(a);
  if ((fa < 0) == (f(b) < 0)) throw std::invalid_argument("no sign change");
  while (b - a > tol) {
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    if ((fm < 0) == (fa < 0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

namespace {

void search(std::size_t e, std::size_t estimates, std::size_t truths,
            const std::function<double(std::size_t, std::size_t)>& score, std::vector<bool>& used,
            std::vector<std::optional<std::size_t>>& current, double value, double& best_value,
            std::vector<std::optional<std::size_t>>& best) {
  if (e == estimates) {
    if (value > best_value) {
      best_value = value;
      best = current;
    }
    return;
  }
  current[e].reset();
  search(e + 1, estimates, truths, score, used, current, value, best_value, best);
  for (std::size_t t = 0; t < truths; ++t) {
    if (used[t]) continue;
    const double s = score(e, t);
    if (s <= 0.0) continue;
    used[t] = true;
    current[e] = t;
    search(e + 1, estimates, truths, score, used, current, value + s, best_value, best);
    used[t] = false;
    current[e].reset();
  }
}

}  // namespace

std::vector<std::optional<std::size_t>> exhaustive_assignment(
    std::size_t estimates, std::size_t truths, const std::function<double(std::size_t, std::size_t)>& score) {
  std::vector<bool> used(truths, false);
  std::vector<std::optional<std::size_t>> current(estimates), best(estimates);
  double best_value = -1.0;
  search(0, estimates, truths, score, used, current, 0.0, best_value, best);
  return best;
}

double naive_relative_l1(std::span<const double> a, std::span<const double> b) {
  long double num = 0, den = 0;
  for (std::size_t k = 0; k < b.size(); ++k) {
    num += std::abs(a[k] - b[k]);
    den += std::abs(b[k]);
  }
  return static_cast<double>(num / den);
}

}  // namespace nilm::testing
