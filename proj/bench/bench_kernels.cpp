// Serial vs OpenMP timings of the heavy kernels. Arg 0 = serial, 1 = parallel.
#include <benchmark/benchmark.h>

#include "qkdnoise/di_qkd.hpp"
#include "qkdnoise/dv_mdi.hpp"
#include "qkdnoise/oracle_fock.hpp"
#include "qkdnoise/scan.hpp"

using namespace qkdnoise;

namespace {

Exec exec_of(const benchmark::State& st) { return st.range(0) ? Exec::kParallel : Exec::kSerial; }

void BM_MdiAppendixSums(benchmark::State& st) {
    const auto c = mdi::DvMdiConfig::symmetric(1.0, 1.0, 0.8, 0.05, 1.0, DetectorKind::kOnOff);
    for (auto _ : st) benchmark::DoNotOptimize(mdi::coincidence_probs(c, exec_of(st)));
}
BENCHMARK(BM_MdiAppendixSums)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_DiClickSumsAppendix(benchmark::State& st) {
    const auto c = di::DiConfig::symmetric(0.9, 0.003);
    for (auto _ : st)
        benchmark::DoNotOptimize(di::di_click_sums(0.2, 1.0, c, di::DiEngine::kAppendixSums, exec_of(st)));
}
BENCHMARK(BM_DiClickSumsAppendix)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_DiClickSumsChannel(benchmark::State& st) {
    const auto c = di::DiConfig::symmetric(0.9, 0.05);
    for (auto _ : st)
        benchmark::DoNotOptimize(di::di_click_sums(0.2, 1.0, c, di::DiEngine::kChannelModel, exec_of(st)));
}
BENCHMARK(BM_DiClickSumsChannel)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_MonteCarloSourceMid(benchmark::State& st) {
    const auto c = dv::DvSourceMidConfig::symmetric(0.8, 0.9, 0.6, 0.1, 0.9, DetectorKind::kOnOff);
    for (auto _ : st) benchmark::DoNotOptimize(oracle::mc_dv_source_mid(c, 200000, 42, exec_of(st)));
}
BENCHMARK(BM_MonteCarloSourceMid)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_MuMaxCurveMdi(benchmark::State& st) {
    scan::CurveSpec s;
    s.protocol = scan::Protocol::kSixStateMdi;
    s.grid = scan::log_grid(0.05, 0.95, 8);
    s.exec = exec_of(st);
    for (auto _ : st) benchmark::DoNotOptimize(scan::mu_max_curve(s));
}
BENCHMARK(BM_MuMaxCurveMdi)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_KeyRatioMap(benchmark::State& st) {
    auto m = scan::default_map_spec();
    m.t_grid = scan::linear_grid(0.01, 1.0, 50);
    m.mu_grid = scan::linear_grid(0.0, 0.05, 50);
    for (auto _ : st) benchmark::DoNotOptimize(scan::key_ratio_map(m, exec_of(st)));
}
BENCHMARK(BM_KeyRatioMap)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
