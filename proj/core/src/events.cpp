#include "nilm/events.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "nilm/error.hpp"
#include "nilm/stats.hpp"

namespace nilm {

namespace {

constexpr std::size_t kEdgeWindow = 10;

}  // namespace

std::vector<SteadySegment> steady_segments(std::span<const double> p, std::span<const double> q,
                                           double threshold_w, std::size_t settle_periods) {
  if (p.size() != q.size()) fail(ErrorCode::LengthMismatch, "p and q series differ in length");
  if (!(threshold_w > 0.0)) fail(ErrorCode::InvalidArgument, "threshold_w must be positive");
  std::vector<SteadySegment> out;
  const std::size_t n = p.size();
  const std::size_t settle = std::max<std::size_t>(settle_periods, 1);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && std::abs(p[j] - p[j - 1]) < 0.5 * threshold_w) ++j;
    const std::size_t len = j - i;
    if (len >= settle) {
      const std::size_t w = std::min(len, std::max(kEdgeWindow, settle));
      SteadySegment s{i, j, stats::median(p.subspan(i, len)), stats::median(q.subspan(i, len))};
      s.head_p = stats::median(p.subspan(i, w));
      s.head_q = stats::median(q.subspan(i, w));
      s.tail_p = stats::median(p.subspan(j - w, w));
      s.tail_q = stats::median(q.subspan(j - w, w));
      out.push_back(s);
    }
    i = j;
  }
  return out;
}

std::vector<SwitchEvent> detect_steps(std::span<const double> p, std::span<const double> q,
                                      double threshold_w, std::size_t settle_periods) {
  const auto segs = steady_segments(p, q, threshold_w, settle_periods);
  std::vector<SwitchEvent> out;
  for (std::size_t s = 1; s < segs.size(); ++s) {
    const auto& a = segs[s - 1];
    const auto& c = segs[s];
    const double dp = c.head_p - a.tail_p;
    if (std::abs(dp) < threshold_w) continue;
    // First period past the midpoint between the two levels.
    const double mid = 0.5 * (a.tail_p + c.head_p);
    std::size_t k = a.end;
    const std::size_t limit = std::min(c.end, c.begin + 2);
    while (k < limit && (dp > 0.0 ? p[k] <= mid : p[k] >= mid)) ++k;
    out.push_back({k, dp, c.head_q - a.tail_q, dp > 0.0 ? Direction::on : Direction::off});
  }
  return out;
}

std::vector<SwitchEvent> detect_steps(std::span<const PeriodFeatures> features, double threshold_w,
                                      std::size_t settle_periods) {
  return detect_steps(active_power(features), reactive_power(features), threshold_w, settle_periods);
}

namespace {

struct Point {
  double x;
  double y;
};

Point to_point(const SwitchEvent& e) {
  const double s = e.dp >= 0.0 ? 1.0 : -1.0;
  return {std::abs(e.dp), s * e.dq};
}

struct Group {
  std::vector<std::size_t> members;
  double sx = 0.0;
  double sy = 0.0;
  [[nodiscard]] Point mean() const {
    const auto n = static_cast<double>(members.size());
    return {sx / n, sy / n};
  }
};

bool can_merge(const Group& a, const Group& b, std::span<const Point> pts, double rel_tol, double abs_tol) {
  const auto n = static_cast<double>(a.members.size() + b.members.size());
  const Point m{(a.sx + b.sx) / n, (a.sy + b.sy) / n};
  const double tol = std::max(rel_tol * m.x, abs_tol);
  const auto inside = [&](std::size_t i) {
    return std::abs(pts[i].x - m.x) <= tol && std::abs(pts[i].y - m.y) <= tol;
  };
  return std::all_of(a.members.begin(), a.members.end(), inside) &&
         std::all_of(b.members.begin(), b.members.end(), inside);
}

}  // namespace

void pair_schedule(TwoStateCluster& c, std::size_t num_periods) {
  const bool has_on = std::any_of(c.events.begin(), c.events.end(),
                                  [](const auto& e) { return e.direction == Direction::on; });
  const bool has_off = std::any_of(c.events.begin(), c.events.end(),
                                   [](const auto& e) { return e.direction == Direction::off; });
  const bool extend = num_periods > 0 && has_on && has_off;
  const SwitchEvent* open = nullptr;
  bool seen_any = false;
  for (const auto& e : c.events) {
    if (e.direction == Direction::on) {
      if (open) c.unpaired.push_back(*open);
      open = &e;
    } else if (open) {
      if (e.period_index > open->period_index) c.schedule.push_back({open->period_index, e.period_index});
      open = nullptr;
    } else if (!seen_any && extend && e.period_index > 0) {
      c.schedule.push_back({0, e.period_index});
    } else {
      c.unpaired.push_back(e);
    }
    seen_any = true;
  }
  if (open) {
    if (extend && open->period_index < num_periods) {
      c.schedule.push_back({open->period_index, num_periods});
    } else {
      c.unpaired.push_back(*open);
    }
  }
}

std::vector<TwoStateCluster> cluster_events(std::span<const SwitchEvent> events, double rel_tol,
                                            double abs_tol_w, std::size_t num_periods) {
  if (!(rel_tol > 0.0) || !(abs_tol_w > 0.0)) {
    fail(ErrorCode::InvalidArgument, "cluster tolerances must be positive");
  }
  std::vector<std::size_t> order(events.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return events[a].period_index < events[b].period_index;
  });
  std::vector<Point> pts(events.size());
  for (std::size_t i = 0; i < events.size(); ++i) pts[i] = to_point(events[i]);

  std::vector<Group> groups;
  groups.reserve(events.size());
  for (std::size_t i : order) groups.push_back({{i}, pts[i].x, pts[i].y});

  // Closest feasible pair first; ties keep the earliest pair in scan order.
  while (groups.size() > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < groups.size(); ++i) {
      const Point mi = groups[i].mean();
      for (std::size_t j = i + 1; j < groups.size(); ++j) {
        const Point mj = groups[j].mean();
        const double d = std::hypot(mi.x - mj.x, mi.y - mj.y);
        if (d < best && can_merge(groups[i], groups[j], pts, rel_tol, abs_tol_w)) {
          best = d;
          bi = i;
          bj = j;
        }
      }
    }
    if (!std::isfinite(best)) break;
    auto& g = groups[bi];
    g.members.insert(g.members.end(), groups[bj].members.begin(), groups[bj].members.end());
    g.sx += groups[bj].sx;
    g.sy += groups[bj].sy;
    groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(bj));
  }

  std::vector<TwoStateCluster> out;
  out.reserve(groups.size());
  for (auto& g : groups) {
    std::sort(g.members.begin(), g.members.end(), [&](std::size_t a, std::size_t b) {
      if (events[a].period_index != events[b].period_index) {
        return events[a].period_index < events[b].period_index;
      }
      return a < b;
    });
    TwoStateCluster c;
    const Point m = g.mean();
    c.mean_dp = m.x;
    c.mean_dq = m.y;
    for (std::size_t i : g.members) c.events.push_back(events[i]);
    pair_schedule(c, num_periods);
    out.push_back(std::move(c));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.events.front().period_index != b.events.front().period_index) {
      return a.events.front().period_index < b.events.front().period_index;
    }
    return a.mean_dp > b.mean_dp;
  });
  for (std::size_t k = 0; k < out.size(); ++k) out[k].id = "two_state_" + std::to_string(k + 1);
  return out;
}

std::vector<std::vector<double>> reconstruct_power(std::span<const TwoStateCluster> clusters,
                                                   std::size_t num_periods) {
  std::vector<std::vector<double>> out;
  out.reserve(clusters.size());
  for (const auto& c : clusters) {
    std::vector<double> s(num_periods, 0.0);
    for (const auto& iv : c.schedule) {
      for (std::size_t k = iv.begin; k < std::min(iv.end, num_periods); ++k) s[k] = c.mean_dp;
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace nilm
