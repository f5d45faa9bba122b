#include "nilm/fsm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nilm/error.hpp"
#include "nilm/stats.hpp"

namespace nilm {

std::vector<double> residual_power(std::span<const double> aggregate_p,
                                   const std::vector<std::vector<double>>& estimates) {
  std::vector<double> out(aggregate_p.begin(), aggregate_p.end());
  for (const auto& e : estimates) {
    if (e.size() != out.size()) fail(ErrorCode::LengthMismatch, "estimate length differs from the aggregate");
    for (std::size_t k = 0; k < out.size(); ++k) out[k] -= e[k];
  }
  return out;
}

HarmonicCorrelation find_correlated_harmonic(std::span<const double> dp, std::span<const HarmonicSeries> harmonics,
                                             double min_abs_r, double noise_floor_w, const std::vector<bool>* mask) {
  if (harmonics.empty()) fail(ErrorCode::InvalidArgument, "candidate harmonic set is empty");
  if (mask && mask->size() != dp.size()) fail(ErrorCode::LengthMismatch, "mask length differs from dp");
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < dp.size(); ++k) {
    if (std::abs(dp[k]) > noise_floor_w && (!mask || (*mask)[k])) idx.push_back(k);
  }
  HarmonicCorrelation best;
  double best_abs = -1.0;
  std::vector<double> x, y;
  for (const auto& h : harmonics) {
    if (h.magnitude.size() != dp.size()) fail(ErrorCode::LengthMismatch, "harmonic series length differs from dp");
    if (idx.size() < kMinCorrelationSamples) break;
    x.clear();
    y.clear();
    for (auto k : idx) {
      x.push_back(h.magnitude[k]);
      y.push_back(dp[k]);
    }
    const double r = stats::pearson(x, y);
    if (std::abs(r) > best_abs) {
      best_abs = std::abs(r);
      const auto fit = stats::fit_line(x, y);
      best = {h.order, r, fit.slope, fit.intercept, idx.size()};
    }
  }
  if (best_abs < min_abs_r) {
    std::ostringstream os;
    if (idx.size() < kMinCorrelationSamples) {
      os << "only " << idx.size() << " periods above the noise floor";
    } else {
      os << "best |r| = " << best_abs << " (harmonic " << best.harmonic_index << ") below " << min_abs_r;
    }
    fail(ErrorCode::NoCorrelatedHarmonic, os.str());
  }
  return best;
}

FsmFit fit_and_estimate(std::span<const double> dp, std::span<const double> hx, const std::vector<bool>& on_mask,
                        std::size_t smooth) {
  if (dp.size() != hx.size() || dp.size() != on_mask.size()) {
    fail(ErrorCode::LengthMismatch, "dp, harmonic and mask lengths differ");
  }
  std::vector<double> x, y;
  for (std::size_t k = 0; k < dp.size(); ++k) {
    if (!on_mask[k]) continue;
    x.push_back(hx[k]);
    y.push_back(dp[k]);
  }
  if (x.size() < kMinCorrelationSamples) {
    std::ostringstream os;
    os << "fit needs " << kMinCorrelationSamples << " on-periods, got " << x.size();
    fail(ErrorCode::InsufficientData, os.str());
  }
  const std::size_t half = smooth / 2;
  const auto xs = half > 0 ? stats::running_median(x, half) : x;
  const auto ys = half > 0 ? stats::running_median(y, half) : y;
  const double mx = stats::mean(xs);
  double var = 0.0;
  for (double v : xs) var += (v - mx) * (v - mx);
  var /= static_cast<double>(xs.size());
  if (var < 1e-12) fail(ErrorCode::DegenerateFit, "harmonic magnitude is constant over the on-periods");

  const auto line = stats::fit_line(xs, ys);
  FsmFit out{line.slope, line.intercept, std::vector<double>(dp.size(), 0.0)};
  for (std::size_t k = 0; k < dp.size(); ++k) {
    if (on_mask[k]) out.estimate[k] = std::max(0.0, line.slope * hx[k] + line.intercept);
  }
  return out;
}

std::vector<int> default_candidate_harmonics() {
  std::vector<int> out;
  for (int k = 2; k <= 13; ++k) out.push_back(k);
  return out;
}

namespace {

double window_median(std::span<const double> h, std::ptrdiff_t lo, std::ptrdiff_t hi) {
  lo = std::max<std::ptrdiff_t>(lo, 0);
  hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(h.size()));
  if (hi - lo < 2) return std::nan("");
  return stats::median(h.subspan(static_cast<std::size_t>(lo), static_cast<std::size_t>(hi - lo)));
}

bool coincides(std::span<const double> h, const SwitchEvent& e, double thr, const FsmStageParams& p) {
  const auto t = static_cast<std::ptrdiff_t>(e.period_index);
  const auto g = static_cast<std::ptrdiff_t>(p.step_guard);
  const auto w = static_cast<std::ptrdiff_t>(p.step_window);
  const double before = window_median(h, t - g - w, t - g);
  const double after = window_median(h, t + g - 1, t + g - 1 + w);
  if (std::isnan(before) || std::isnan(after)) return false;
  const double jump = e.direction == Direction::on ? after - before : before - after;
  return jump >= thr;
}

}  // namespace

FsmStageResult run_fsm_stage(std::span<const double> base_residual, std::span<const PeriodFeatures> features,
                             std::span<const TwoStateCluster> clusters,
                             const std::vector<std::vector<double>>& cluster_series, const FsmStageParams& params) {
  const std::size_t n = base_residual.size();
  if (features.size() != n) fail(ErrorCode::LengthMismatch, "features and residual differ in length");
  if (cluster_series.size() != clusters.size()) fail(ErrorCode::LengthMismatch, "one series per cluster expected");
  if (params.candidates.empty()) fail(ErrorCode::InvalidArgument, "candidate harmonic set is empty");

  FsmStageResult best;
  double best_abs = -1.0;
  std::vector<double> best_dp;
  for (int order : params.candidates) {
    if (order < 1) fail(ErrorCode::InvalidArgument, "harmonic order must be >= 1");
    const auto h = harmonic_magnitudes(features, static_cast<std::size_t>(order));
    std::vector<double> diffs;
    for (std::size_t k = 1; k < n; ++k) diffs.push_back(std::abs(h[k] - h[k - 1]));
    const double sigma = 1.4826 * stats::median(diffs) / std::sqrt(2.0);
    const double range = stats::quantile(h, 0.95) - stats::quantile(h, 0.05);
    const double thr = std::max({params.step_fraction * range, 5.0 * sigma, 1e-9});

    FsmStageResult cand;
    std::vector<double> dp(base_residual.begin(), base_residual.end());
    cand.on_mask.assign(n, false);
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      const auto& cl = clusters[c];
      if (cl.schedule.empty()) continue;
      std::size_t hits = 0;
      for (const auto& e : cl.events) hits += coincides(h, e, thr, params) ? 1 : 0;
      if (2 * hits < cl.events.size() || hits == 0) continue;
      cand.motor_clusters.push_back(c);
      for (std::size_t k = 0; k < n; ++k) dp[k] += cluster_series[c][k];
    }
    if (!cand.motor_clusters.empty()) {
      // The motor's steps vary with its load, so its events may be spread over
      // several clusters; pair them jointly.
      TwoStateCluster joint;
      for (auto c : cand.motor_clusters) joint.events.insert(joint.events.end(), clusters[c].events.begin(), clusters[c].events.end());
      std::stable_sort(joint.events.begin(), joint.events.end(),
                       [](const auto& a, const auto& b) { return a.period_index < b.period_index; });
      pair_schedule(joint, n);
      for (const auto& iv : joint.schedule) {
        for (std::size_t k = iv.begin; k < std::min(iv.end, n); ++k) cand.on_mask[k] = true;
      }
    }
    if (cand.motor_clusters.empty()) {
      // No switching seen: the motor may run throughout; use the harmonic level.
      if (range < 10.0 * sigma) continue;
      const double level = stats::quantile(h, 0.05) + 0.5 * range;
      for (std::size_t k = 0; k < n; ++k) cand.on_mask[k] = h[k] > level;
      cand.mask_from_events = false;
    }
    std::vector<double> x, y;
    for (std::size_t k = 0; k < n; ++k) {
      if (!cand.on_mask[k]) continue;
      x.push_back(h[k]);
      y.push_back(dp[k]);
    }
    if (x.size() < kMinCorrelationSamples) continue;
    const double r = stats::pearson(x, y);
    if (std::abs(r) <= best_abs) continue;
    best_abs = std::abs(r);
    cand.correlation = {order, r, 0.0, 0.0, x.size()};
    best = std::move(cand);
    best_dp = std::move(dp);
  }
  if (best_abs < params.min_abs_r) {
    std::ostringstream os;
    if (best_abs < 0.0) {
      os << "no candidate harmonic shows a usable on-interval";
    } else {
      os << "best |r| = " << best_abs << " (harmonic " << best.correlation.harmonic_index << ") below "
         << params.min_abs_r;
    }
    fail(ErrorCode::NoCorrelatedHarmonic, os.str());
  }
  std::vector<double> off;
  for (std::size_t k = 0; k < n; ++k) {
    if (!best.on_mask[k]) off.push_back(best_dp[k]);
  }
  if (off.size() >= kMinCorrelationSamples) {
    // Level of everything else, seen while the motor is off.
    best.baseline = stats::median(off);
    for (auto& v : best_dp) v -= best.baseline;
  }
  const auto h = harmonic_magnitudes(features, static_cast<std::size_t>(best.correlation.harmonic_index));
  best.fit = fit_and_estimate(best_dp, h, best.on_mask, params.smooth);
  best.correlation.slope = best.fit.slope;
  best.correlation.intercept = best.fit.intercept;
  return best;
}

}  // namespace nilm
