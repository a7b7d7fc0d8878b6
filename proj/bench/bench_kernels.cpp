// Serial reference paths against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <cmath>
#include <omp.h>

#include "abstractnet/approximator.hpp"
#include "abstractnet/toy_task.hpp"

using namespace abstractnet;

namespace {

Raster bench_target(int size) {
  Raster img(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      img.set(x, y, {std::uint8_t(x * 255 / size), std::uint8_t(y * 255 / size),
                     std::uint8_t(128 + 127 * std::sin(0.1 * (x + y))), 255});
  return img;
}

const ApproxState& bench_state() {
  static const ApproxState state(bench_target(256), Raster(256, 256, Color{128, 128, 128, 255}));
  return state;
}

void BM_CandidatesSerial(benchmark::State& st) {
  ApproxConfig cfg;
  std::uint64_t seed = 0;
  for (auto _ : st) benchmark::DoNotOptimize(score_candidates_serial(bench_state(), cfg, seed++));
  st.SetItemsProcessed(st.iterations() * cfg.candidates);
}
BENCHMARK(BM_CandidatesSerial)->Unit(benchmark::kMillisecond);

void BM_CandidatesParallel(benchmark::State& st) {
  ApproxConfig cfg;
  std::uint64_t seed = 0;
  const int jobs = static_cast<int>(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(score_candidates_parallel(bench_state(), cfg, seed++, jobs));
  st.SetItemsProcessed(st.iterations() * cfg.candidates);
}
BENCHMARK(BM_CandidatesParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

struct GradFixture {
  ToyTask task = make_toy_task(7);
  ControlNetBlock cb = make_controlnet(task);
  std::vector<ToySample> batch;

  explicit GradFixture(int batch_size) {
    Rng rng(1);
    for (int i = 0; i < batch_size; ++i) batch.push_back(task.sample(rng));
  }
};

void BM_BatchGradientsSerial(benchmark::State& st) {
  GradFixture f(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(batch_gradients_serial(f.cb, f.batch));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_BatchGradientsSerial)->Arg(2)->Arg(16);

void BM_BatchGradientsParallel(benchmark::State& st) {
  GradFixture f(static_cast<int>(st.range(0)));
  const int jobs = omp_get_max_threads();
  for (auto _ : st) benchmark::DoNotOptimize(batch_gradients_parallel(f.cb, f.batch, jobs));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_BatchGradientsParallel)->Arg(2)->Arg(16);

}  // namespace

BENCHMARK_MAIN();
