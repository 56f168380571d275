// Parallel kernels against their serial references: FFT vs direct DFT, the
// noise sweep, and the medoid search.

#include <benchmark/benchmark.h>

#include <random>

#include "scaptcha/asr.hpp"
#include "scaptcha/craft.hpp"
#include "scaptcha/detect.hpp"
#include "scaptcha/reference.hpp"
#include "scaptcha/synth.hpp"

using namespace scaptcha;

namespace {

AudioBuffer noise(std::size_t n) { return synth::white_noise(n, 0.1, 1); }

const MockOracle& mock() {
  static const MockOracle m(fit_mock(synth::corpus({"two", "seven", "yes", "k"}, 3)));
  return m;
}

std::vector<ActivationVector> vectors(std::size_t n) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::vector<ActivationVector> v(n);
  for (auto& x : v) {
    x.values.resize(128);
    for (double& e : x.values) e = g(rng);
  }
  return v;
}

void BM_DftFftw(benchmark::State& state) {
  const AudioBuffer x = noise(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(dft(x));
  state.SetComplexityN(state.range(0));
}

void BM_DftReference(benchmark::State& state) {
  const AudioBuffer x = noise(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(reference::dft(x));
  state.SetComplexityN(state.range(0));
}

void BM_Sweep(benchmark::State& state) {
  const AudioBuffer x = synth::utterance("two", 0);
  NoiseSweepConfig sweep;
  sweep.base_seed = 1;
  const Execution exec = state.range(0) ? Execution::Parallel : Execution::Serial;
  for (auto _ : state) benchmark::DoNotOptimize(transcribe_sweep(mock(), x, sweep, exec));
}

void BM_Medoid(benchmark::State& state) {
  const auto v = vectors(static_cast<std::size_t>(state.range(1)));
  const Execution exec = state.range(0) ? Execution::Parallel : Execution::Serial;
  for (auto _ : state) benchmark::DoNotOptimize(compute_center(v, CenterRule::Medoid, exec));
}

}  // namespace

BENCHMARK(BM_DftFftw)->RangeMultiplier(4)->Range(256, 4096)->Complexity();
BENCHMARK(BM_DftReference)->RangeMultiplier(4)->Range(256, 4096)->Complexity();
BENCHMARK(BM_Sweep)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Medoid)->ArgNames({"parallel", "n"})->Args({0, 200})->Args({1, 200})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
