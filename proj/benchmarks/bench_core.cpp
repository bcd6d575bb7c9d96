// Microbenchmarks for the hot paths: sampling, E-step, full EM fits, and
// the step-up decision rule.

#include <cstdint>
#include <vector>

#include <benchmark/benchmark.h>

#include "clfdr/count_data.hpp"
#include "clfdr/fdr.hpp"
#include "clfdr/loglinear.hpp"
#include "clfdr/multinomial_mixture.hpp"
#include "clfdr/rng.hpp"
#include "clfdr/sim.hpp"
#include "clfdr/threshold.hpp"

namespace {

const clfdr::CovariateVector kBiomass{{0.86, 1.34, 1.81, 2.37, 3.00}};

clfdr::SimConfig bench_config() {
  clfdr::SimConfig cfg;
  cfg.m = 500;
  cfg.seed = 7;
  cfg.covariate = kBiomass;
  cfg.size_pmf = clfdr::default_size_pmf();
  cfg.params.gammas = {0.0, -1.13, 0.78};
  cfg.params.pis = {0.69, 0.16, 0.15};
  return cfg;
}

const clfdr::CountDataset& bench_dataset() {
  static const clfdr::CountDataset ds =
      clfdr::sample_dataset(bench_config(), 0).first;
  return ds;
}

void BM_multinomial_draw(benchmark::State& state) {
  clfdr::Rng rng(42);
  const auto probs = clfdr::multinomial_probs(0.78, kBiomass);
  std::vector<std::int64_t> out;
  for (auto _ : state) {
    rng.multinomial(state.range(0), probs, out);
    benchmark::DoNotOptimize(out);
  }
}
BENCHMARK(BM_multinomial_draw)->Arg(25)->Arg(911);

void BM_sample_dataset(benchmark::State& state) {
  const auto cfg = bench_config();
  std::size_t rep = 0;
  for (auto _ : state) {
    auto ds = clfdr::sample_dataset(cfg, rep++);
    benchmark::DoNotOptimize(ds);
  }
}
BENCHMARK(BM_sample_dataset)->Unit(benchmark::kMicrosecond);

void BM_e_step(benchmark::State& state) {
  const auto& ds = bench_dataset();
  const auto params = bench_config().params;
  for (auto _ : state) {
    auto resp = clfdr::e_step(ds, params);
    benchmark::DoNotOptimize(resp);
  }
}
BENCHMARK(BM_e_step)->Unit(benchmark::kMicrosecond);

void BM_clfdr_stats(benchmark::State& state) {
  const auto& ds = bench_dataset();
  const auto params = bench_config().params;
  for (auto _ : state) {
    auto stats = clfdr::clfdr_stats(ds, params);
    benchmark::DoNotOptimize(stats);
  }
}
BENCHMARK(BM_clfdr_stats)->Unit(benchmark::kMicrosecond);

void BM_fit_em(benchmark::State& state) {
  const auto& ds = bench_dataset();
  clfdr::EmOptions opts;
  opts.restarts = 1;
  opts.seed = 3;
  for (auto _ : state) {
    auto fit = clfdr::fit_em(ds, 2, opts);
    benchmark::DoNotOptimize(fit);
  }
}
BENCHMARK(BM_fit_em)->Unit(benchmark::kMillisecond);

void BM_lfdr_stepup(benchmark::State& state) {
  clfdr::Rng rng(5);
  std::vector<double> stats(static_cast<std::size_t>(state.range(0)));
  for (auto& s : stats) s = rng.uniform01();
  for (auto _ : state) {
    auto res = clfdr::lfdr_stepup(stats, 0.1);
    benchmark::DoNotOptimize(res);
  }
}
BENCHMARK(BM_lfdr_stepup)->Arg(500)->Arg(10000);

void BM_rejection_boundary(benchmark::State& state) {
  clfdr::TwoGroupModel model;
  model.pi0 = 0.5;
  model.gamma1 = 1.0;
  model.covariate = kBiomass;
  model.size_pmf = clfdr::default_size_pmf();
  for (auto _ : state) {
    auto bd = clfdr::rejection_boundary(25, model, 0.2);
    benchmark::DoNotOptimize(bd);
  }
}
BENCHMARK(BM_rejection_boundary);

}  // namespace

BENCHMARK_MAIN();
