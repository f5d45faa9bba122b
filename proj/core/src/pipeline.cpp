#include "nilm/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "nilm/error.hpp"
#include "nilm/evaluation.hpp"
#include "nilm/stats.hpp"

namespace nilm {

std::string_view to_string(EstimateClass c) noexcept {
  switch (c) {
    case EstimateClass::two_state: return "two_state";
    case EstimateClass::ubr_single_phase: return "ubr_single_phase";
    case EstimateClass::ubr_three_phase: return "ubr_three_phase";
    case EstimateClass::fsm_varying: return "fsm_varying";
    case EstimateClass::residual_unexplained: return "residual_unexplained";
  }
  return "residual_unexplained";
}

std::string_view to_string(SourceAlgorithm s) noexcept {
  switch (s) {
    case SourceAlgorithm::ubr: return "ubr";
    case SourceAlgorithm::events: return "events";
    case SourceAlgorithm::fsm: return "fsm";
    case SourceAlgorithm::accounting: return "accounting";
  }
  return "accounting";
}

std::optional<EstimateClass> estimate_class_from_string(std::string_view s) noexcept {
  for (auto c : {EstimateClass::two_state, EstimateClass::ubr_single_phase, EstimateClass::ubr_three_phase,
                 EstimateClass::fsm_varying, EstimateClass::residual_unexplained}) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

std::optional<SourceAlgorithm> source_algorithm_from_string(std::string_view s) noexcept {
  for (auto a : {SourceAlgorithm::ubr, SourceAlgorithm::events, SourceAlgorithm::fsm, SourceAlgorithm::accounting}) {
    if (to_string(a) == s) return a;
  }
  return std::nullopt;
}

void recompute_unexplained(DisaggregationReport& report) {
  report.unexplained_p = residual_power(report.aggregate_p, [&] {
    std::vector<std::vector<double>> series;
    for (const auto& e : report.estimates) series.push_back(e.p_series);
    return series;
  }());
}

void attribute_unexplained(DisaggregationReport& report) {
  const std::size_t n = report.aggregate_p.size();
  auto it = std::find_if(report.estimates.begin(), report.estimates.end(),
                         [](const auto& e) { return e.load_class == EstimateClass::residual_unexplained; });
  std::vector<double> rest(report.aggregate_p);
  for (const auto& e : report.estimates) {
    if (e.load_class == EstimateClass::residual_unexplained) continue;
    if (e.p_series.size() != n) fail(ErrorCode::LengthMismatch, "estimate " + e.id + " has the wrong length");
    for (std::size_t k = 0; k < n; ++k) rest[k] -= e.p_series[k];
  }
  const bool active = std::any_of(report.aggregate_p.begin(), report.aggregate_p.end(),
                                  [](double v) { return v != 0.0; });
  if (it == report.estimates.end() && active) {
    LoadEstimate c;
    c.id = kResidualId;
    c.load_class = EstimateClass::residual_unexplained;
    c.source = SourceAlgorithm::accounting;
    report.estimates.push_back(std::move(c));
    it = report.estimates.end() - 1;
  }
  if (it != report.estimates.end()) {
    it->p_series = std::move(rest);
    if (report.period_duration.size() == n) it->energy_wh = energy_wh(it->p_series, report.period_duration);
  }
  recompute_unexplained(report);
}

namespace {

std::vector<PeriodInterval> mask_intervals(const std::vector<bool>& mask) {
  std::vector<PeriodInterval> out;
  std::size_t k = 0;
  while (k < mask.size()) {
    if (!mask[k]) {
      ++k;
      continue;
    }
    std::size_t j = k;
    while (j < mask.size() && mask[j]) ++j;
    out.push_back({k, j});
    k = j;
  }
  return out;
}

std::string stage_warning(const char* stage, const Error& e) {
  return std::string(stage) + ": " + std::string(to_string(e.code())) + ": " + e.what();
}

}  // namespace

DisaggregationReport disaggregate(const Waveform& current, const Waveform& voltage, const PipelineConfig& config) {
  current.validate();
  voltage.validate();
  if (current.size() != voltage.size() || current.sample_rate != voltage.sample_rate) {
    fail(ErrorCode::LengthMismatch, "current and voltage must share length and sample rate");
  }
  DisaggregationReport report;
  report.config = config;
  report.sample_rate = current.sample_rate;
  const auto boundaries = segment_periods(voltage, config.nominal_frequency);

  std::size_t harmonics = config.harmonic_count;
  for (int k : config.fsm.candidates) harmonics = std::max(harmonics, static_cast<std::size_t>(std::max(k, 1)));
  const auto agg = compute_period_features(current, voltage, boundaries, harmonics);
  const std::size_t P = agg.size();
  for (const auto& f : agg) {
    report.period_t_start.push_back(f.t_start);
    report.period_duration.push_back(f.duration);
    report.aggregate_p.push_back(f.p);
  }
  const auto& T = report.period_duration;

  Waveform residual = current;
  std::vector<std::vector<double>> fixed;  // UBR series, subtracted before the FSM stage
  if (config.enable_ubr) {
    try {
      auto ubr = extract_ubr(current, voltage, boundaries, config.ubr);
      std::size_t idx = 0;
      for (auto& ex : ubr.extractions) {
        LoadEstimate e;
        const bool three = ex.kind == UbrKind::three_phase;
        e.id = std::string(three ? "ubr_three_phase_" : "ubr_single_phase_") + std::to_string(++idx);
        e.load_class = three ? EstimateClass::ubr_three_phase : EstimateClass::ubr_single_phase;
        e.source = SourceAlgorithm::ubr;
        e.p_series = ex.p_series;
        const auto feats = compute_period_features(ex.ubr_current, voltage, boundaries, config.harmonic_count);
        const double pmax = *std::max_element(e.p_series.begin(), e.p_series.end());
        std::vector<double> pf, thd;
        for (const auto& f : feats) {
          if (f.p > 0.01 * pmax) {
            pf.push_back(f.power_factor());
            thd.push_back(f.thd());
          }
        }
        if (!pf.empty()) {
          e.power_factor = stats::median(pf);
          e.thd = stats::median(thd);
        }
        fixed.push_back(e.p_series);
        report.ubr_stage.push_back({ex.kind, ex.pattern.agreement});
        report.estimates.push_back(std::move(e));
      }
      residual = std::move(ubr.residual);
    } catch (const Error& e) {
      report.warnings.push_back(stage_warning("ubr", e));
    }
  }

  const auto res_features = compute_period_features(residual, voltage, boundaries, harmonics);

  std::vector<TwoStateCluster> clusters;
  std::vector<std::vector<double>> cluster_series;
  if (config.enable_events) {
    const auto events = detect_steps(res_features, config.steps.threshold_w, config.steps.settle_periods);
    clusters = cluster_events(events, config.cluster.rel_tol, config.cluster.abs_tol_w, P);
    cluster_series = reconstruct_power(clusters, P);
    report.event_stage.events = events.size();
    report.event_stage.clusters = clusters.size();
    for (const auto& c : clusters) report.event_stage.unpaired += c.unpaired.size();
  }

  std::vector<bool> is_motor(clusters.size(), false);
  if (config.enable_fsm) {
    try {
      auto base = residual_power(report.aggregate_p, fixed);
      base = residual_power(base, cluster_series);
      auto stage = run_fsm_stage(base, agg, clusters, cluster_series, config.fsm);
      LoadEstimate e;
      e.id = "fsm_varying_1";
      e.load_class = EstimateClass::fsm_varying;
      e.source = SourceAlgorithm::fsm;
      e.p_series = stage.fit.estimate;
      e.schedule = mask_intervals(stage.on_mask);
      double dp = 0.0, dq = 0.0;
      for (auto c : stage.motor_clusters) {
        is_motor[c] = true;
        dp += clusters[c].mean_dp;
        dq += clusters[c].mean_dq;
      }
      if (dp > 0.0) e.power_factor = dp / std::hypot(dp, dq);
      if (!stage.mask_from_events) {
        report.warnings.push_back("fsm: no coincident switch events; on-periods taken from the harmonic level");
      }
      report.fsm_stage = stage.correlation;
      report.estimates.push_back(std::move(e));
    } catch (const Error& e) {
      report.warnings.push_back(stage_warning("fsm", e));
    }
  }

  std::size_t idx = 0;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    if (is_motor[c] || clusters[c].schedule.empty()) continue;
    LoadEstimate e;
    e.id = "two_state_" + std::to_string(++idx);
    e.load_class = EstimateClass::two_state;
    e.source = SourceAlgorithm::events;
    e.p_series = std::move(cluster_series[c]);
    e.schedule = clusters[c].schedule;
    const double s = std::hypot(clusters[c].mean_dp, clusters[c].mean_dq);
    if (s > 0.0) e.power_factor = clusters[c].mean_dp / s;
    report.estimates.push_back(std::move(e));
  }

  for (auto& e : report.estimates) e.energy_wh = energy_wh(e.p_series, T);
  attribute_unexplained(report);
  return report;
}

double identified_energy_fraction(const DisaggregationReport& report) {
  const double total = energy_wh(report.aggregate_p, report.period_duration);
  if (total <= 0.0) return 0.0;
  double identified = 0.0;
  for (const auto& e : report.estimates) {
    if (e.load_class != EstimateClass::residual_unexplained) identified += e.energy_wh;
  }
  return identified / total;
}

EvaluationSummary evaluate_report(const DisaggregationReport& report, std::span<const NamedSeries> truths) {
  std::vector<NamedSeries> est;
  for (const auto& e : report.estimates) {
    est.push_back({e.id, e.p_series, e.load_class == EstimateClass::residual_unexplained});
  }
  const auto match = match_estimates_to_truth(est, truths, report.period_duration);
  EvaluationSummary out;
  for (const auto& p : match.pairs) {
    out.rows.push_back({"matched", est[p.estimate].id, {truths[p.truth].id},
                        energy_wh(est[p.estimate].p, report.period_duration), p.result});
  }
  if (match.residual) {
    EvaluationRow row{"residual", "", {}, 0.0, match.residual->result};
    if (match.residual->estimate) {
      row.estimate_id = est[*match.residual->estimate].id;
      row.e_est = energy_wh(est[*match.residual->estimate].p, report.period_duration);
    }
    for (auto t : match.residual->truths) row.truth_ids.push_back(truths[t].id);
    out.rows.push_back(std::move(row));
  }
  for (std::size_t i = 0; i < match.false_positives.size(); ++i) {
    const auto e = match.false_positives[i];
    out.rows.push_back({"false_positive", est[e].id, {}, energy_wh(est[e].p, report.period_duration),
                        match.false_positive_results[i]});
  }
  const auto all = match.all_results();
  if (std::any_of(all.begin(), all.end(), [](const auto& r) { return r.defined(); })) {
    out.weighted_accuracy = weighted_accuracy(all);
    out.weighted_accuracy_with_fp = weighted_accuracy_including_false_positives(all);
  }
  out.identified_energy_fraction = identified_energy_fraction(report);
  return out;
}

namespace {

struct Isolated {
  Waveform current;
  Waveform voltage;
  std::vector<double> boundaries;
};

// Current of the load switched on near period `b`: the recording minus the
// period b-2 replayed, resampled to each period's length.
Isolated isolate_switch_on(const Waveform& current, const Waveform& voltage, std::span<const double> boundaries,
                           std::size_t b, std::size_t periods) {
  const auto ranges = period_ranges(boundaries);
  if (b < 2 || b + periods > ranges.size()) fail(ErrorCode::InsufficientData, "switch-on too close to the record edge");
  const auto ref = ranges[b - 2];
  const auto first = ranges[b - 1];
  Isolated out;
  out.current.sample_rate = out.voltage.sample_rate = current.sample_rate;
  out.current.kind = SignalKind::current;
  out.voltage.kind = SignalKind::voltage;
  const double m = static_cast<double>(ref.size());
  for (std::size_t k = b - 1; k <= b - 1 + periods; ++k) {
    const auto r = ranges[k];
    const double len = static_cast<double>(r.size());
    for (std::size_t n = r.begin; n < r.end; ++n) {
      const double x = static_cast<double>(n - r.begin) / len * m;
      const auto i0 = std::min(static_cast<std::size_t>(x), ref.size() - 1);
      const auto i1 = std::min(i0 + 1, ref.size() - 1);
      const double w = x - static_cast<double>(i0);
      const double base = (1.0 - w) * current.samples[ref.begin + i0] + w * current.samples[ref.begin + i1];
      out.current.samples.push_back(current.samples[n] - base);
      out.voltage.samples.push_back(voltage.samples[n]);
    }
  }
  for (std::size_t k = b - 1; k <= b + periods; ++k) {
    out.boundaries.push_back(boundaries[k] - static_cast<double>(first.begin));
  }
  return out;
}

}  // namespace

void label_estimates(DisaggregationReport& report, const FingerprintModel* model, const Waveform* current,
                     const Waveform* voltage, const LabelOptions& options) {
  const bool have_wave = current && voltage;
  std::vector<double> boundaries;
  if (have_wave) {
    if (current->size() != voltage->size()) fail(ErrorCode::LengthMismatch, "current and voltage differ in length");
    boundaries = segment_periods(*voltage, report.config.nominal_frequency);
    if (boundaries.size() != report.num_periods() + 1) {
      fail(ErrorCode::LengthMismatch, "recording does not match the report's periods");
    }
  }
  for (auto& e : report.estimates) {
    if (e.load_class == EstimateClass::residual_unexplained) continue;
    if (e.power_factor) e.label = std::string(to_string(power_factor_label(*e.power_factor, e.thd.value_or(0.0), options.thresholds)));
    if (!have_wave || e.schedule.empty()) continue;
    const auto& iv = e.schedule.front();
    const std::size_t periods = std::min(options.transient_periods, iv.end - iv.begin);
    try {
      const auto iso = isolate_switch_on(*current, *voltage, boundaries, iv.begin, periods);
      const auto feats = compute_period_features(iso.current, iso.voltage, iso.boundaries, 20);
      const std::span<const PeriodFeatures> tail(feats.data() + feats.size() / 2, feats.size() - feats.size() / 2);
      e.label = std::string(to_string(power_factor_label(tail, options.thresholds)));
      if (!model) continue;
      std::vector<double> amp;
      for (const auto& f : tail) amp.push_back(f.harmonic_magnitude(1));
      const double steady = stats::median(amp);
      if (!(steady > 0.0)) fail(ErrorCode::NoSteadyState, "isolated current has no fundamental");
      const auto fv = extract_transient_features(iso.current, steady, options.transient);
      const auto m = classify_fingerprint(*model, fv);
      e.fingerprint = FingerprintLabel{m.label, m.confidence, m.low_confidence};
    } catch (const Error& err) {
      report.warnings.push_back("label " + e.id + ": " + std::string(to_string(err.code())) + ": " + err.what());
    }
  }
}

}  // namespace nilm
