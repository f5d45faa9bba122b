#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "nilm/signal.hpp"

namespace nilm {

enum class UbrKind { none, single_phase, three_phase };

std::string_view to_string(UbrKind k) noexcept;

/// Conduction window [begin, end] in absolute samples (both inclusive).
struct EdgePair {
  std::size_t begin = 0;
  std::size_t end = 0;
  double score = 0.0;  // smaller of the two edge curvature scores
  friend bool operator==(const EdgePair& a, const EdgePair& b) { return a.begin == b.begin && a.end == b.end; }
};

struct PeakEdgeSet {
  std::vector<SampleRange> periods;
  std::vector<std::vector<EdgePair>> pairs;  // one list per period, sorted by begin

  [[nodiscard]] std::size_t period_count() const noexcept { return periods.size(); }
  [[nodiscard]] std::size_t pair_count() const noexcept;
};

struct EdgeDetectionParams {
  double curvature_threshold = 8.0;  // multiple of the robust per-period scale
  std::size_t average_periods = 4;   // neighbours on each side in the synchronous average
  std::size_t median_half = 3;       // half-width of the curvature baseline median
  double scale_floor = 5e-4;         // relative to the peak of the averaged period
};

PeakEdgeSet detect_peak_edges(const Waveform& current, std::span<const double> boundaries,
                              const EdgeDetectionParams& params = {});

/// One expected pulse per period: centre and width as fractions of the period.
struct PulseSlot {
  double phase = 0.0;
  double width = 0.0;
};

struct UbrPattern {
  UbrKind kind = UbrKind::none;
  std::vector<PulseSlot> slots;  // sorted by phase
  double agreement = 0.0;        // fraction of periods carrying every slot
};

/// Modal-phase template match over all periods.
UbrPattern classify_pattern(const PeakEdgeSet& edges);
UbrKind classify_ubr_type(const PeakEdgeSet& edges);

struct FilterParams {
  double phase_tolerance = 0.10;  // fraction of the period
  double min_fit_fraction = 0.5;
};

/// Keeps the pair nearest to each template slot and re-inserts missing slots
/// with the modal width. Throws PatternCollapse when too few periods fit natively.
PeakEdgeSet filter_edges(const PeakEdgeSet& edges, const UbrPattern& pattern, const FilterParams& params = {});

struct InterpolationParams {
  std::size_t margin = 1;          // samples added to each side of a window
  std::size_t baseline_harmonics = 9;
  double max_condition = 100.0;     // of the baseline design matrix
  double max_window_fraction = 0.40;
};

/// Replaces each window with a smooth bridge: a harmonic baseline fitted to the
/// samples outside every window of `exclude` (and `windows`), plus a cubic
/// through the baseline deviations at two anchors per side.
Waveform interpolate_residual(const Waveform& current, const PeakEdgeSet& windows,
                              const PeakEdgeSet* exclude = nullptr, const InterpolationParams& params = {});

struct UbrExtraction {
  UbrKind kind = UbrKind::none;
  UbrPattern pattern;
  PeakEdgeSet windows;
  Waveform ubr_current;
  Waveform residual_current;
  std::vector<double> p_series;  // W per period
};

struct ExtractionParams {
  std::size_t max_rectifiers = 2;
  EdgeDetectionParams detection;
  FilterParams filter;
  InterpolationParams interpolation;
};

struct UbrResult {
  std::vector<UbrExtraction> extractions;
  Waveform residual;
};

/// Sequential peeling; each pass must find a rectifier kind not yet extracted.
UbrResult extract_ubr(const Waveform& current, const Waveform& voltage, std::span<const double> boundaries,
                      const ExtractionParams& params = {});

}  // namespace nilm
