#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "nilm/signal.hpp"

namespace nilm {

enum class Direction { on, off };

struct SwitchEvent {
  std::size_t period_index = 0;  // first period at the new level
  double dp = 0.0;               // W
  double dq = 0.0;               // var
  Direction direction = Direction::on;
};

/// Half-open period range [begin, end).
struct PeriodInterval {
  std::size_t begin = 0;
  std::size_t end = 0;
  friend bool operator==(const PeriodInterval&, const PeriodInterval&) = default;
};

struct TwoStateCluster {
  std::string id;
  double mean_dp = 0.0;  // W, magnitude of the step
  double mean_dq = 0.0;  // var, sign follows the on-step
  std::vector<SwitchEvent> events;    // temporal order
  std::vector<PeriodInterval> schedule;
  std::vector<SwitchEvent> unpaired;  // members that found no partner
};

struct StepDetectionParams {
  double threshold_w = 50.0;
  std::size_t settle_periods = 3;
};

struct ClusterParams {
  double rel_tol = 0.10;
  double abs_tol_w = 30.0;
};

/// Steady segment [begin, end) with its median active and reactive power.
struct SteadySegment {
  std::size_t begin = 0;
  std::size_t end = 0;
  double p = 0.0;  // medians over the whole segment
  double q = 0.0;
  double head_p = 0.0;  // medians over the first and last few periods
  double head_q = 0.0;
  double tail_p = 0.0;
  double tail_q = 0.0;
};

std::vector<SteadySegment> steady_segments(std::span<const double> p, std::span<const double> q,
                                           double threshold_w, std::size_t settle_periods);

std::vector<SwitchEvent> detect_steps(std::span<const PeriodFeatures> features, double threshold_w = 50.0,
                                      std::size_t settle_periods = 3);
std::vector<SwitchEvent> detect_steps(std::span<const double> p, std::span<const double> q,
                                      double threshold_w = 50.0, std::size_t settle_periods = 3);

/// Pairs c.events (time-ordered) into c.schedule and c.unpaired. A new on-event
/// supersedes an open one; with num_periods > 0 and both
/// directions present, a leading off or trailing on extends to the recording edge.
void pair_schedule(TwoStateCluster& c, std::size_t num_periods);

/// Agglomerative grouping in the (|dp|, signed dq) plane followed by temporal
/// on/off pairing. With num_periods > 0, a leading off-event or trailing
/// on-event of a cluster that has both directions is extended to the record edge.
std::vector<TwoStateCluster> cluster_events(std::span<const SwitchEvent> events, double rel_tol = 0.10,
                                            double abs_tol_w = 30.0, std::size_t num_periods = 0);

/// One series per cluster: mean_dp on the schedule, 0 elsewhere.
std::vector<std::vector<double>> reconstruct_power(std::span<const TwoStateCluster> clusters,
                                                   std::size_t num_periods);

}  // namespace nilm
