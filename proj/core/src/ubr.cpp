#include "nilm/ubr.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "nilm/error.hpp"
#include "nilm/stats.hpp"

namespace nilm {

std::string_view to_string(UbrKind k) noexcept {
  switch (k) {
    case UbrKind::none: return "none";
    case UbrKind::single_phase: return "single_phase";
    case UbrKind::three_phase: return "three_phase";
  }
  return "none";
}

std::size_t PeakEdgeSet::pair_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : pairs) n += p.size();
  return n;
}

namespace {

constexpr std::size_t kMinPeriodSamples = 16;

// Centered median over a circular window of 2 * half + 1 samples.
std::vector<double> circular_median(const std::vector<double>& c, std::size_t half) {
  const std::size_t n = c.size();
  std::vector<double> out(n), buf(2 * half + 1);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < buf.size(); ++k) buf[k] = c[(j + n + k - half % n) % n];
    auto mid = buf.begin() + static_cast<std::ptrdiff_t>(half);
    std::nth_element(buf.begin(), mid, buf.end());
    out[j] = *mid;
  }
  return out;
}

struct Edge {
  std::size_t pos;
  double score;
};

std::vector<EdgePair> pair_half(const std::vector<Edge>& edges, std::size_t offset) {
  std::vector<EdgePair> out;
  for (std::size_t k = 0; k + 1 < edges.size(); k += 2) {
    if (edges[k + 1].pos <= edges[k].pos) continue;
    out.push_back({offset + edges[k].pos, offset + edges[k + 1].pos, std::min(edges[k].score, edges[k + 1].score)});
  }
  return out;
}

}  // namespace

PeakEdgeSet detect_peak_edges(const Waveform& current, std::span<const double> boundaries,
                              const EdgeDetectionParams& params) {
  if (!(params.curvature_threshold > 0.0)) fail(ErrorCode::InvalidArgument, "curvature threshold must be positive");
  PeakEdgeSet out;
  out.periods = period_ranges(boundaries);
  const auto& x = current.samples;
  const std::size_t P = out.periods.size();
  out.pairs.resize(P);
  const std::size_t M = params.average_periods;

  std::vector<double> a, c, e;
  for (std::size_t p = 0; p < P; ++p) {
    const auto range = out.periods[p];
    const std::size_t N = range.size();
    if (N < kMinPeriodSamples || range.end > x.size()) continue;

    a.assign(N, 0.0);
    std::vector<std::size_t> count(N, 0);
    const std::size_t lo = p >= M ? p - M : 0;
    const std::size_t hi = std::min(P, p + M + 1);
    for (std::size_t q = lo; q < hi; ++q) {
      const std::size_t base = out.periods[q].begin;
      for (std::size_t j = 0; j < N && base + j < x.size(); ++j) {
        a[j] += x[base + j];
        ++count[j];
      }
    }
    double peak = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
      a[j] /= static_cast<double>(count[j]);
      peak = std::max(peak, std::abs(a[j]));
    }

    c.assign(N, 0.0);
    for (std::size_t j = 1; j + 1 < N; ++j) c[j] = a[j + 1] - 2.0 * a[j] + a[j - 1];
    c[0] = c[1];
    c[N - 1] = c[N - 2];
    const auto base = circular_median(c, params.median_half);
    std::vector<double> ex(N);
    for (std::size_t j = 0; j < N; ++j) ex[j] = c[j] - base[j];
    // Two-tap sum: a kink between samples spreads over two second differences.
    e.assign(N, 0.0);
    std::vector<double> mag(N);
    for (std::size_t j = 0; j < N; ++j) {
      e[j] = ex[j] + ex[(j + N - 1) % N];
      mag[j] = std::abs(e[j]);
    }
    const double scale = std::max({stats::median(mag), params.scale_floor * peak, 1e-12});
    const double thr = params.curvature_threshold * scale;

    std::vector<std::vector<std::size_t>> runs;
    for (std::size_t j = 0; j < N; ++j) {
      if (mag[j] <= thr) continue;
      const double sign = j < N / 2 ? 1.0 : -1.0;
      if (e[j] * sign <= 0.0) continue;
      if (!runs.empty() && j - runs.back().back() <= 1) {
        runs.back().push_back(j);
      } else {
        runs.push_back({j});
      }
    }
    std::vector<Edge> first, second;
    for (const auto& r : runs) {
      const auto best = *std::max_element(r.begin(), r.end(), [&](auto i, auto k) { return mag[i] < mag[k]; });
      (best < N / 2 ? first : second).push_back({best, mag[best] / scale});
    }
    auto pairs = pair_half(first, range.begin);
    auto tail = pair_half(second, range.begin);
    pairs.insert(pairs.end(), tail.begin(), tail.end());
    out.pairs[p] = std::move(pairs);
  }
  return out;
}

namespace {

struct Obs {
  double phase;
  double width;
  std::size_t period;
};

struct Mode {
  double phase;
  double width;
  std::size_t periods;
};

constexpr double kMinPeriodsForClassification = 10;
constexpr double kModeGap = 0.01;
constexpr double kMirrorTol = 0.03;
constexpr double kAgreeTol = 0.05;
constexpr double kAgreeFraction = 0.60;

std::vector<Obs> observations(const PeakEdgeSet& edges) {
  std::vector<Obs> obs;
  for (std::size_t p = 0; p < edges.periods.size(); ++p) {
    const auto r = edges.periods[p];
    const double n = static_cast<double>(r.size());
    if (n <= 0.0) continue;
    for (const auto& e : edges.pairs[p]) {
      const double centre = 0.5 * (static_cast<double>(e.begin) + static_cast<double>(e.end));
      obs.push_back({(centre - static_cast<double>(r.begin)) / n, static_cast<double>(e.end - e.begin) / n, p});
    }
  }
  std::sort(obs.begin(), obs.end(), [](const auto& a, const auto& b) { return a.phase < b.phase; });
  return obs;
}

std::vector<Mode> find_modes(const std::vector<Obs>& obs, std::size_t num_periods) {
  std::vector<Mode> modes;
  std::size_t i = 0;
  while (i < obs.size()) {
    std::size_t j = i + 1;
    while (j < obs.size() && obs[j].phase - obs[j - 1].phase <= kModeGap) ++j;
    std::vector<double> ph, wd;
    std::vector<std::size_t> per;
    for (std::size_t k = i; k < j; ++k) {
      ph.push_back(obs[k].phase);
      wd.push_back(obs[k].width);
      per.push_back(obs[k].period);
    }
    std::sort(per.begin(), per.end());
    const auto distinct = static_cast<std::size_t>(std::unique(per.begin(), per.end()) - per.begin());
    if (static_cast<double>(distinct) >= 0.5 * static_cast<double>(num_periods)) {
      modes.push_back({stats::median(ph), stats::median(wd), distinct});
    }
    i = j;
  }
  return modes;
}

const Mode* mirror_of(const std::vector<Mode>& modes, double phase) {
  const Mode* best = nullptr;
  for (const auto& m : modes) {
    if (std::abs(m.phase - (phase + 0.5)) <= kMirrorTol &&
        (!best || std::abs(m.phase - phase - 0.5) < std::abs(best->phase - phase - 0.5))) {
      best = &m;
    }
  }
  return best;
}

double agreement(const PeakEdgeSet& edges, const std::vector<PulseSlot>& slots) {
  std::size_t ok = 0, total = 0;
  for (std::size_t p = 0; p < edges.periods.size(); ++p) {
    const auto r = edges.periods[p];
    if (r.size() == 0) continue;
    ++total;
    const double n = static_cast<double>(r.size());
    bool all = true;
    for (const auto& s : slots) {
      bool hit = false;
      for (const auto& e : edges.pairs[p]) {
        const double ph = (0.5 * static_cast<double>(e.begin + e.end) - static_cast<double>(r.begin)) / n;
        if (std::abs(ph - s.phase) <= kAgreeTol) {
          hit = true;
          break;
        }
      }
      all = all && hit;
    }
    if (all) ++ok;
  }
  return total ? static_cast<double>(ok) / static_cast<double>(total) : 0.0;
}

}  // namespace

UbrPattern classify_pattern(const PeakEdgeSet& edges) {
  UbrPattern none;
  const std::size_t P = edges.periods.size();
  if (static_cast<double>(P) < kMinPeriodsForClassification || edges.pair_count() == 0) return none;
  const auto modes = find_modes(observations(edges), P);

  // Three-phase: two pulses per half-cycle about 60 degrees apart, mirrored.
  UbrPattern three;
  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < modes.size(); ++i) {
    for (std::size_t j = i + 1; j < modes.size(); ++j) {
      const auto& a = modes[i];
      const auto& b = modes[j];
      if (a.phase >= 0.5 || b.phase >= 0.5) continue;
      const double sep = b.phase - a.phase;
      if (sep < 0.10 || sep > 0.25) continue;
      const Mode* ma = mirror_of(modes, a.phase);
      const Mode* mb = mirror_of(modes, b.phase);
      if (!ma || !mb || ma == mb) continue;
      const double gap = std::abs(sep - 1.0 / 6.0);
      if (gap >= best_gap) continue;
      best_gap = gap;
      three.slots = {{a.phase, a.width}, {b.phase, b.width}, {ma->phase, ma->width}, {mb->phase, mb->width}};
    }
  }
  if (!three.slots.empty()) {
    three.agreement = agreement(edges, three.slots);
    if (three.agreement >= kAgreeFraction) {
      three.kind = UbrKind::three_phase;
      return three;
    }
  }

  UbrPattern single;
  std::size_t best_count = 0;
  for (const auto& m : modes) {
    if (m.phase >= 0.5) continue;
    const Mode* mm = mirror_of(modes, m.phase);
    if (!mm) continue;
    const std::size_t cnt = std::min(m.periods, mm->periods);
    if (cnt <= best_count) continue;
    best_count = cnt;
    single.slots = {{m.phase, m.width}, {mm->phase, mm->width}};
  }
  if (!single.slots.empty()) {
    single.agreement = agreement(edges, single.slots);
    if (single.agreement >= kAgreeFraction) {
      single.kind = UbrKind::single_phase;
      return single;
    }
  }
  none.agreement = std::max(three.agreement, single.agreement);
  return none;
}

UbrKind classify_ubr_type(const PeakEdgeSet& edges) { return classify_pattern(edges).kind; }

PeakEdgeSet filter_edges(const PeakEdgeSet& edges, const UbrPattern& pattern, const FilterParams& params) {
  if (pattern.kind == UbrKind::none || pattern.slots.empty()) {
    fail(ErrorCode::InvalidArgument, "filter_edges needs a rectifier pattern");
  }
  PeakEdgeSet out;
  out.periods = edges.periods;
  out.pairs.resize(edges.periods.size());
  std::size_t native = 0, total = 0;
  for (std::size_t p = 0; p < edges.periods.size(); ++p) {
    const auto r = edges.periods[p];
    if (r.size() < kMinPeriodSamples) continue;
    ++total;
    const double n = static_cast<double>(r.size());
    std::vector<bool> used(edges.pairs[p].size(), false);
    bool complete = true;
    for (const auto& s : pattern.slots) {
      std::size_t best = edges.pairs[p].size();
      double best_d = params.phase_tolerance;
      for (std::size_t k = 0; k < edges.pairs[p].size(); ++k) {
        if (used[k]) continue;
        const auto& e = edges.pairs[p][k];
        const double b0 = (static_cast<double>(e.begin) - static_cast<double>(r.begin)) / n;
        const double b1 = (static_cast<double>(e.end) - static_cast<double>(r.begin)) / n;
        const double d = std::abs(0.5 * (b0 + b1) - s.phase);
        // Must cover the modal window by half, so a pair spanning the gap
        // between two pulses cannot stand in for either.
        const double shared = std::min(b1, s.phase + 0.5 * s.width) - std::max(b0, s.phase - 0.5 * s.width);
        if (shared < 0.5 * std::min(b1 - b0, s.width)) continue;
        if (d <= best_d) {
          best_d = d;
          best = k;
        }
      }
      if (best < edges.pairs[p].size()) {
        used[best] = true;
        out.pairs[p].push_back(edges.pairs[p][best]);
      } else {
        complete = false;
        const double c = static_cast<double>(r.begin) + s.phase * n;
        const double h = 0.5 * s.width * n;
        const auto b = static_cast<std::size_t>(std::max(0.0, std::round(c - h)));
        const auto e = static_cast<std::size_t>(std::max(0.0, std::round(c + h)));
        out.pairs[p].push_back({b, std::max(e, b + 1), 0.0});
      }
    }
    std::sort(out.pairs[p].begin(), out.pairs[p].end(), [](const auto& a, const auto& b) { return a.begin < b.begin; });
    if (complete) ++native;
  }
  if (total == 0 || static_cast<double>(native) < params.min_fit_fraction * static_cast<double>(total)) {
    std::ostringstream os;
    os << native << " of " << total << " periods fit the " << to_string(pattern.kind) << " template";
    fail(ErrorCode::PatternCollapse, os.str());
  }
  return out;
}

namespace {

struct Span {
  std::ptrdiff_t lo;
  std::ptrdiff_t hi;  // inclusive
};

std::vector<Span> widened(const std::vector<EdgePair>& pairs, std::size_t margin, std::size_t size) {
  std::vector<Span> out;
  for (const auto& e : pairs) {
    const auto lo = static_cast<std::ptrdiff_t>(e.begin) - static_cast<std::ptrdiff_t>(margin);
    const auto hi = static_cast<std::ptrdiff_t>(e.end + margin);
    out.push_back({std::max<std::ptrdiff_t>(lo, 0), std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(size) - 1)});
  }
  return out;
}

// Truncated Fourier series fitted over one period; evaluates at any offset.
// The order is the highest one whose design stays well conditioned given the gaps.
class HarmonicBaseline {
public:
  HarmonicBaseline(const std::vector<double>& x, std::size_t begin, std::size_t n, const std::vector<bool>& observed,
                   std::size_t harmonics, double max_condition)
      : begin_(begin), n_(static_cast<double>(n)) {
    std::size_t m = 0;
    for (bool o : observed) m += o ? 1 : 0;
    if (m < 3) return;
    const std::size_t kmax = std::min(harmonics, (m - 1) / 4);
    const auto cols = static_cast<Eigen::Index>(2 * kmax + 1);
    Eigen::MatrixXd A(static_cast<Eigen::Index>(m), cols);
    Eigen::VectorXd y(static_cast<Eigen::Index>(m));
    Eigen::Index row = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!observed[j]) continue;
      const double t = static_cast<double>(j);
      A(row, 0) = 1.0;
      for (std::size_t k = 1; k <= kmax; ++k) {
        const double w = 2.0 * std::numbers::pi * static_cast<double>(k) * t / n_;
        A(row, static_cast<Eigen::Index>(2 * k - 1)) = std::cos(w);
        A(row, static_cast<Eigen::Index>(2 * k)) = std::sin(w);
      }
      y(row) = x[begin + j];
      ++row;
    }
    const Eigen::MatrixXd G = A.transpose() * A;
    const Eigen::VectorXd g = A.transpose() * y;
    const double limit = max_condition * max_condition;
    for (std::size_t k = kmax + 1; k-- > 0;) {
      const auto c = static_cast<Eigen::Index>(2 * k + 1);
      const Eigen::MatrixXd sub = G.topLeftCorner(c, c);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sub, Eigen::EigenvaluesOnly);
      const auto& ev = eig.eigenvalues();
      if (k > 0 && !(ev(0) > 0.0 && ev(c - 1) / ev(0) <= limit)) continue;
      k_ = k;
      coef_ = sub.ldlt().solve(g.head(c));
      break;
    }
  }

  [[nodiscard]] std::size_t order() const noexcept { return k_; }

  [[nodiscard]] double at(std::ptrdiff_t index) const {
    if (coef_.size() == 0) return 0.0;
    const double t = static_cast<double>(index - static_cast<std::ptrdiff_t>(begin_));
    double v = coef_(0);
    for (std::size_t k = 1; k <= k_; ++k) {
      const double w = 2.0 * std::numbers::pi * static_cast<double>(k) * t / n_;
      v += coef_(static_cast<Eigen::Index>(2 * k - 1)) * std::cos(w) + coef_(static_cast<Eigen::Index>(2 * k)) * std::sin(w);
    }
    return v;
  }

private:
  std::size_t begin_;
  double n_;
  std::size_t k_ = 0;
  Eigen::VectorXd coef_;
};

double lagrange(const std::vector<double>& xs, const std::vector<double>& ys, double t) {
  double v = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double w = ys[i];
    for (std::size_t j = 0; j < xs.size(); ++j) {
      if (j != i) w *= (t - xs[j]) / (xs[i] - xs[j]);
    }
    v += w;
  }
  return v;
}

}  // namespace

Waveform interpolate_residual(const Waveform& current, const PeakEdgeSet& windows, const PeakEdgeSet* exclude,
                              const InterpolationParams& params) {
  Waveform out = current;
  const auto& x = current.samples;
  auto& r = out.samples;
  const auto size = static_cast<std::ptrdiff_t>(x.size());

  for (std::size_t p = 0; p < windows.periods.size(); ++p) {
    if (windows.pairs[p].empty()) continue;
    const auto range = windows.periods[p];
    const std::size_t N = range.size();
    if (range.end > x.size()) continue;
    const auto own = widened(windows.pairs[p], params.margin, x.size());
    for (const auto& s : own) {
      if (static_cast<double>(s.hi - s.lo + 1) > params.max_window_fraction * static_cast<double>(N)) {
        std::ostringstream os;
        os << "window of " << s.hi - s.lo + 1 << " samples in period " << p << " exceeds "
           << params.max_window_fraction * 100.0 << " % of " << N;
        fail(ErrorCode::WindowTooWide, os.str());
      }
    }
    std::vector<bool> observed(N, true);
    const auto mark = [&](const std::vector<Span>& spans) {
      for (const auto& s : spans) {
        for (auto i = s.lo; i <= s.hi; ++i) {
          const auto j = i - static_cast<std::ptrdiff_t>(range.begin);
          if (j >= 0 && j < static_cast<std::ptrdiff_t>(N)) observed[static_cast<std::size_t>(j)] = false;
        }
      }
    };
    mark(own);
    if (exclude && p < exclude->pairs.size()) mark(widened(exclude->pairs[p], params.margin, x.size()));
    const HarmonicBaseline base(x, range.begin, N, observed, params.baseline_harmonics, params.max_condition);

    const auto free_anchor = [&](std::ptrdiff_t i) {
      if (i < 0 || i >= size) return false;
      return std::none_of(own.begin(), own.end(), [&](const Span& s) { return i >= s.lo && i <= s.hi; });
    };
    for (const auto& s : own) {
      std::vector<double> ax, ay;
      const std::array<std::ptrdiff_t, 4> cubic{s.lo - 2, s.lo - 1, s.hi + 1, s.hi + 2};
      const bool full = std::all_of(cubic.begin(), cubic.end(), free_anchor);
      const auto add = [&](std::ptrdiff_t i) {
        if (!free_anchor(i)) return;
        ax.push_back(static_cast<double>(i - s.lo));
        ay.push_back(x[static_cast<std::size_t>(i)] - base.at(i));
      };
      if (full) {
        for (auto i : cubic) add(i);
      } else {
        add(s.lo - 1);
        add(s.hi + 1);
      }
      for (auto i = s.lo; i <= s.hi; ++i) {
        const double corr = ax.empty() ? 0.0 : ax.size() == 1 ? ay[0] : lagrange(ax, ay, static_cast<double>(i - s.lo));
        r[static_cast<std::size_t>(i)] = base.at(i) + corr;
      }
    }
  }
  return out;
}

namespace {

// Splits a into u + res with u close to a - r and u + res == a exactly.
void split_exact(double a, double r, double& u, double& res) {
  u = a - r;
  res = a - u;
  for (int k = 0; k < 8 && u + res != a; ++k) {
    res = std::nextafter(res, u + res < a ? std::numeric_limits<double>::infinity()
                                          : -std::numeric_limits<double>::infinity());
  }
  if (u + res != a) {
    u = 0.0;
    res = a;
  }
}

}  // namespace

UbrResult extract_ubr(const Waveform& current, const Waveform& voltage, std::span<const double> boundaries,
                      const ExtractionParams& params) {
  if (current.size() != voltage.size()) fail(ErrorCode::LengthMismatch, "current and voltage differ in length");
  if (params.max_rectifiers > 2) fail(ErrorCode::InvalidArgument, "at most two rectifiers are supported");
  UbrResult result;
  result.residual = current;
  for (std::size_t pass = 0; pass < params.max_rectifiers; ++pass) {
    const Waveform& x = result.residual;
    const auto edges = detect_peak_edges(x, boundaries, params.detection);
    const auto pattern = classify_pattern(edges);
    if (pattern.kind == UbrKind::none) break;
    const bool repeat = std::any_of(result.extractions.begin(), result.extractions.end(),
                                    [&](const auto& e) { return e.kind == pattern.kind; });
    if (repeat) break;
    auto filtered = filter_edges(edges, pattern, params.filter);
    const auto bridge = interpolate_residual(x, filtered, &edges, params.interpolation);

    UbrExtraction ex;
    ex.kind = pattern.kind;
    ex.pattern = pattern;
    ex.windows = std::move(filtered);
    ex.ubr_current = x;
    ex.residual_current = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
      split_exact(x.samples[i], bridge.samples[i], ex.ubr_current.samples[i], ex.residual_current.samples[i]);
    }
    ex.p_series = active_power(compute_period_features(ex.ubr_current, voltage, boundaries, 1));
    Waveform next = ex.residual_current;
    result.extractions.push_back(std::move(ex));
    result.residual = std::move(next);
  }
  return result;
}

}  // namespace nilm
