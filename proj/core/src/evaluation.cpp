#include "nilm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "nilm/error.hpp"

namespace nilm {

namespace {

constexpr double kSecondsPerHour = 3600.0;

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) fail(ErrorCode::LengthMismatch, what);
}

AccuracyResult finish(double delta_e, double e_true) {
  AccuracyResult r;
  r.delta_e = delta_e;
  r.e_true = e_true;
  if (e_true > 0.0) r.acc = 1.0 - delta_e / e_true;
  return r;
}

}  // namespace

double energy_wh(std::span<const double> p, std::span<const double> period_durations) {
  check_lengths(p.size(), period_durations.size(), "power series and period durations differ in length");
  double e = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) e += p[k] * period_durations[k];
  return e / kSecondsPerHour;
}

double energy_wh(std::span<const double> p, double period_duration) {
  double e = 0.0;
  for (double v : p) e += v;
  return e * period_duration / kSecondsPerHour;
}

AccuracyResult accuracy(std::span<const double> p_est, std::span<const double> p_true, double period_duration) {
  check_lengths(p_est.size(), p_true.size(), "estimate and truth differ in length");
  if (!(period_duration > 0.0)) fail(ErrorCode::InvalidArgument, "period duration must be positive");
  double d = 0.0, t = 0.0;
  for (std::size_t k = 0; k < p_true.size(); ++k) {
    d += std::abs(p_est[k] - p_true[k]);
    t += std::abs(p_true[k]);
  }
  return finish(d * period_duration / kSecondsPerHour, t * period_duration / kSecondsPerHour);
}

AccuracyResult accuracy(std::span<const double> p_est, std::span<const double> p_true,
                        std::span<const double> period_durations) {
  check_lengths(p_est.size(), p_true.size(), "estimate and truth differ in length");
  check_lengths(p_true.size(), period_durations.size(), "series and period durations differ in length");
  double d = 0.0, t = 0.0;
  for (std::size_t k = 0; k < p_true.size(); ++k) {
    d += std::abs(p_est[k] - p_true[k]) * period_durations[k];
    t += std::abs(p_true[k]) * period_durations[k];
  }
  return finish(d / kSecondsPerHour, t / kSecondsPerHour);
}

double weighted_accuracy(std::span<const AccuracyResult> results) {
  double d = 0.0, t = 0.0;
  bool any = false;
  for (const auto& r : results) {
    if (!r.defined()) continue;
    any = true;
    d += r.delta_e;
    t += r.e_true;
  }
  if (!any) fail(ErrorCode::AllUndefined, "no result with nonzero true energy");
  return 1.0 - d / t;
}

double weighted_accuracy_including_false_positives(std::span<const AccuracyResult> results) {
  double d = 0.0, t = 0.0;
  bool any = false;
  for (const auto& r : results) {
    d += r.delta_e;
    if (!r.defined()) continue;
    any = true;
    t += r.e_true;
  }
  if (!any) fail(ErrorCode::AllUndefined, "no result with nonzero true energy");
  return 1.0 - d / t;
}

std::vector<AccuracyResult> MatchResult::all_results() const {
  std::vector<AccuracyResult> out;
  for (const auto& p : pairs) out.push_back(p.result);
  if (residual) out.push_back(residual->result);
  out.insert(out.end(), false_positive_results.begin(), false_positive_results.end());
  return out;
}

MatchResult match_estimates_to_truth(std::span<const NamedSeries> estimates, std::span<const NamedSeries> truths,
                                     std::span<const double> period_durations) {
  const std::size_t n = period_durations.size();
  for (const auto& e : estimates) check_lengths(e.p.size(), n, "estimate length differs from the period count");
  for (const auto& t : truths) check_lengths(t.p.size(), n, "truth length differs from the period count");

  struct Candidate {
    double ratio;
    double overlap;
    std::size_t e;
    std::size_t t;
  };
  std::vector<Candidate> cands;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    if (estimates[i].catch_all) continue;
    for (std::size_t j = 0; j < truths.size(); ++j) {
      double lo = 0.0, hi = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double a = std::max(0.0, estimates[i].p[k]);
        const double b = std::max(0.0, truths[j].p[k]);
        lo += std::min(a, b) * period_durations[k];
        hi += std::max(a, b) * period_durations[k];
      }
      if (lo > 0.0) cands.push_back({lo / hi, lo / kSecondsPerHour, i, j});
    }
  }
  std::sort(cands.begin(), cands.end(), [&](const Candidate& a, const Candidate& b) {
    if (a.ratio != b.ratio) return a.ratio > b.ratio;
    if (a.overlap != b.overlap) return a.overlap > b.overlap;
    return std::tie(truths[a.t].id, estimates[a.e].id) < std::tie(truths[b.t].id, estimates[b.e].id);
  });

  MatchResult out;
  std::vector<bool> used_e(estimates.size(), false), used_t(truths.size(), false);
  for (const auto& c : cands) {
    if (used_e[c.e] || used_t[c.t]) continue;
    used_e[c.e] = used_t[c.t] = true;
    out.pairs.push_back({c.e, c.t, c.overlap, c.ratio, accuracy(estimates[c.e].p, truths[c.t].p, period_durations)});
  }
  std::sort(out.pairs.begin(), out.pairs.end(),
            [&](const auto& a, const auto& b) { return truths[a.truth].id < truths[b.truth].id; });

  std::vector<double> rest_true(n, 0.0), rest_est(n, 0.0);
  ResidualComparison rc;
  for (std::size_t j = 0; j < truths.size(); ++j) {
    if (used_t[j]) continue;
    rc.truths.push_back(j);
    for (std::size_t k = 0; k < n; ++k) rest_true[k] += truths[j].p[k];
  }
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    if (!estimates[i].catch_all) continue;
    if (!rc.estimate) rc.estimate = i;
    for (std::size_t k = 0; k < n; ++k) rest_est[k] += estimates[i].p[k];
  }
  if (!rc.truths.empty() || rc.estimate) {
    rc.result = accuracy(rest_est, rest_true, period_durations);
    out.residual = std::move(rc);
  }

  for (std::size_t i = 0; i < estimates.size(); ++i) {
    if (used_e[i] || estimates[i].catch_all) continue;
    out.false_positives.push_back(i);
    std::vector<double> zero(n, 0.0);
    out.false_positive_results.push_back(accuracy(estimates[i].p, zero, period_durations));
  }
  return out;
}

}  // namespace nilm
