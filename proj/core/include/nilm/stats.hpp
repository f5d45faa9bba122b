#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace nilm::stats {

double mean(std::span<const double> x);
/// Median of a copy; empty input yields 0.
double median(std::span<const double> x);
/// Linear-interpolated quantile, q in [0, 1].
double quantile(std::span<const double> x, double q);

/// Pearson correlation; 0 when either series is constant.
double pearson(std::span<const double> x, std::span<const double> y);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least squares y = slope * x + intercept.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Centered running median, window = 2 * half + 1, shrinking at the ends.
std::vector<double> running_median(std::span<const double> x, std::size_t half);

}  // namespace nilm::stats
