#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nilm {

/// acc = 1 - delta_e / e_true; absent when e_true = 0.
struct AccuracyResult {
  std::optional<double> acc;
  double delta_e = 0.0;  // Wh
  double e_true = 0.0;   // Wh

  [[nodiscard]] bool defined() const noexcept { return acc.has_value(); }
};

/// Energy in Wh of a per-period power series.
double energy_wh(std::span<const double> p, std::span<const double> period_durations);
double energy_wh(std::span<const double> p, double period_duration);

AccuracyResult accuracy(std::span<const double> p_est, std::span<const double> p_true, double period_duration);
AccuracyResult accuracy(std::span<const double> p_est, std::span<const double> p_true,
                        std::span<const double> period_durations);

/// 1 - sum(delta_e) / sum(e_true) over defined results. Throws AllUndefined.
double weighted_accuracy(std::span<const AccuracyResult> results);

/// Same denominator, numerator also carrying the delta_e of undefined entries.
double weighted_accuracy_including_false_positives(std::span<const AccuracyResult> results);

struct NamedSeries {
  std::string id;
  std::vector<double> p;
  bool catch_all = false;  // compared against the truths left unmatched
};

struct MatchedPair {
  std::size_t estimate = 0;
  std::size_t truth = 0;
  double overlap_wh = 0.0;     // sum(min(p_est, p_true)) energy
  double overlap_ratio = 0.0;  // overlap_wh over sum(max(p_est, p_true)) energy
  AccuracyResult result;
};

struct ResidualComparison {
  std::vector<std::size_t> truths;
  std::optional<std::size_t> estimate;
  AccuracyResult result;
};

struct MatchResult {
  std::vector<MatchedPair> pairs;
  std::vector<std::size_t> false_positives;  // estimate indices
  std::vector<AccuracyResult> false_positive_results;
  std::optional<ResidualComparison> residual;

  /// Every scored entry: matched pairs, the residual comparison, false positives.
  [[nodiscard]] std::vector<AccuracyResult> all_results() const;
};

/// Greedy assignment by decreasing overlap ratio (shared energy over the energy
/// of the pointwise maximum), then shared energy, then ids. Catch-all estimates are never matched directly.
MatchResult match_estimates_to_truth(std::span<const NamedSeries> estimates, std::span<const NamedSeries> truths,
                                     std::span<const double> period_durations);

}  // namespace nilm
