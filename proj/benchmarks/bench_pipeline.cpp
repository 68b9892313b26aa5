#include <algorithm>

#include <benchmark/benchmark.h>

#include "evtac/braille.hpp"
#include "evtac/pipeline.hpp"
#include "evtac/simulator.hpp"

namespace evtac {
namespace {

struct Fixture {
  ScanConfig cfg;
  SimulatedScan scan;
  EventStream window;  // 10^5 events from the first window
  TimeUs t_s = 0;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture out;
    out.cfg.x_start_mm = -3;
    out.cfg.scan_length_mm = 6;
    out.scan = simulate_scan(SurfaceModel(LineArrayShape{}, SurfacePlacement{-4.0, 0.0}), out.cfg);
    out.t_s = out.scan.trajectory.begin_time();
    const auto win = time_slice(out.scan.events, out.t_s, out.t_s + kDefaultWindowUs + 1);
    const std::size_t step = std::max<std::size_t>(1, win.size() / 100'000);
    for (std::size_t i = 0; i < win.size() && out.window.size() < 100'000; i += step) out.window.push_back(win[i]);
    return out;
  }();
  return f;
}

void BM_DsiSummary(benchmark::State& state) {
  const auto& f = fixture();
  DsiOptions opt;
  opt.threads = static_cast<int>(state.range(0));
  const auto win = make_window(f.window, f.t_s);
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_dsi_summary(win, f.scan.trajectory, f.cfg.intrinsics, f.t_s + 10'000, opt));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * win.events.size()));
}
BENCHMARK(BM_DsiSummary)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_Extract(benchmark::State& state) {
  const auto& f = fixture();
  const auto summary = build_dsi_summary(make_window(f.window, f.t_s), f.scan.trajectory, f.cfg.intrinsics,
                                         f.t_s + 10'000);
  const int g_f = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(extract_depth(summary, 16.0, g_f));
}
BENCHMARK(BM_Extract)->Arg(11)->Arg(45)->Arg(91)->Unit(benchmark::kMillisecond);

void BM_FuseWindow(benchmark::State& state) {
  const auto& f = fixture();
  PipelineParams p;
  p.dsi.threads = 1;
  const auto s = build_window_summaries(f.window, f.scan.trajectory, f.cfg.intrinsics, f.t_s, p);
  for (auto _ : state) benchmark::DoNotOptimize(fuse_window(s, f.cfg.intrinsics, p));
}
BENCHMARK(BM_FuseWindow)->Unit(benchmark::kMillisecond);

void BM_WindowLatency(benchmark::State& state) {
  const auto& f = fixture();
  PipelineParams p;
  p.dsi.threads = 1;
  p.method = static_cast<FusionMethod>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(reconstruct_window(f.window, f.scan.trajectory, f.cfg.intrinsics, f.t_s, p));
  }
  state.SetLabel(to_string(p.method));
}
BENCHMARK(BM_WindowLatency)->Arg(0)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_Iwe(benchmark::State& state) {
  const auto& f = fixture();
  const auto flow = braille::estimate_flow(f.cfg.v_mm_s, f.cfg.intrinsics.fx);
  const std::span<const Event> batch(f.window.data(), std::min<std::size_t>(20'000, f.window.size()));
  for (auto _ : state) benchmark::DoNotOptimize(braille::make_iwe(batch, flow, 640, 480));
}
BENCHMARK(BM_Iwe)->Unit(benchmark::kMicrosecond);

}  // namespace
}  // namespace evtac

BENCHMARK_MAIN();
