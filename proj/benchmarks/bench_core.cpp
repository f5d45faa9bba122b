#include <numbers>

#include <benchmark/benchmark.h>

#include "nilm/events.hpp"
#include "nilm/pipeline.hpp"
#include "nilm/simulator.hpp"
#include "nilm/ubr.hpp"

namespace {

using namespace nilm;

MachineScenario bench_scenario(double seconds) {
  MachineScenario sc;
  sc.duration = seconds;
  sc.noise_rel = 0.005;
  LoadModel u;
  u.id = "drive";
  u.load_class = LoadClass::ubr_three_phase;
  u.params = UbrParams{600.0, std::numbers::pi / 6, {}};
  sc.loads.push_back(u);
  LoadModel h;
  h.id = "heater";
  h.params = TwoStateParams{1500.0, 1.0, {}};
  h.schedule = {{0.2 * seconds, 0.6 * seconds}};
  sc.loads.push_back(h);
  LoadModel m;
  m.id = "pump";
  m.params = TwoStateParams{400.0, 0.8, {}};
  m.schedule = {{0.1 * seconds, 0.3 * seconds}, {0.5 * seconds, 0.9 * seconds}};
  sc.loads.push_back(m);
  return sc;
}

const MachineRecording& recording() {
  static const MachineRecording rec = compose_machine(bench_scenario(10.0));
  return rec;
}

void BM_SegmentPeriods(benchmark::State& state) {
  const auto& rec = recording();
  for (auto _ : state) benchmark::DoNotOptimize(segment_periods(rec.voltage));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(rec.voltage.size()));
}
BENCHMARK(BM_SegmentPeriods);

void BM_PeriodFeatures(benchmark::State& state) {
  const auto& rec = recording();
  const auto b = segment_periods(rec.voltage);
  for (auto _ : state) {
    benchmark::DoNotOptimize(compute_period_features(rec.current, rec.voltage, b, static_cast<std::size_t>(state.range(0))));
  }
}
BENCHMARK(BM_PeriodFeatures)->Arg(1)->Arg(20);

void BM_DetectAndCluster(benchmark::State& state) {
  const auto& rec = recording();
  const auto f = compute_period_features(rec.current, rec.voltage, segment_periods(rec.voltage), 1);
  for (auto _ : state) {
    const auto ev = detect_steps(f);
    benchmark::DoNotOptimize(cluster_events(ev, 0.10, 30.0, f.size()));
  }
}
BENCHMARK(BM_DetectAndCluster);

void BM_ExtractUbr(benchmark::State& state) {
  const auto& rec = recording();
  const auto b = segment_periods(rec.voltage);
  for (auto _ : state) benchmark::DoNotOptimize(extract_ubr(rec.current, rec.voltage, b));
}
BENCHMARK(BM_ExtractUbr)->Unit(benchmark::kMillisecond);

void BM_Disaggregate(benchmark::State& state) {
  const auto& rec = recording();
  for (auto _ : state) benchmark::DoNotOptimize(disaggregate(rec.current, rec.voltage));
}
BENCHMARK(BM_Disaggregate)->Unit(benchmark::kMillisecond);

void BM_ComposeMachine(benchmark::State& state) {
  const auto sc = bench_scenario(10.0);
  for (auto _ : state) benchmark::DoNotOptimize(compose_machine(sc, {false}));
}
BENCHMARK(BM_ComposeMachine)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
