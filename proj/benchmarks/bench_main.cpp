#include <benchmark/benchmark.h>

#include <random>

#include "nrp/features.hpp"
#include "nrp/gbm.hpp"
#include "nrp/pipeline.hpp"
#include "nrp/signal.hpp"
#include "nrp/stats.hpp"
#include "nrp/synth.hpp"

using namespace nrp;

namespace {

PerfusionSignal random_signal(std::mt19937& rng, size_t n) {
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  PerfusionSignal s;
  s.values.resize(n);
  for (double& v : s.values) v = unif(rng);
  s.onset_applied = true;
  return s;
}

void BM_FeatureExtraction(benchmark::State& state) {
  std::mt19937 rng(1);
  std::map<SeqKey, PerfusionSignal> signals;
  for (View view : {View::Ap, View::Lateral}) {
    signals[{Phase::Pre, view}] = random_signal(rng, 15);
    signals[{Phase::Post, view}] = random_signal(rng, 15);
  }
  FeatureConfig cfg;
  cfg.groups = {FeatureGroup::Peak, FeatureGroup::Sips, FeatureGroup::Flow, FeatureGroup::Raw};
  for (auto _ : state) {
    FeatureVector fv = extract_all(signals, cfg);
    benchmark::DoNotOptimize(fv.values.data());
  }
}
BENCHMARK(BM_FeatureExtraction);

void BM_SeriesExtraction(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  std::mt19937 rng(2);
  FrameStack stack;
  stack.bit_depth = 8;
  for (int f = 0; f < 18; ++f) {
    Raster frame;
    frame.width = frame.height = side;
    frame.pixels.resize(static_cast<size_t>(side) * side);
    for (auto& p : frame.pixels) p = static_cast<uint16_t>(rng() % 256);
    stack.frames.push_back(std::move(frame));
  }
  TdtMask mask;
  mask.width = mask.height = side;
  mask.pixels.assign(static_cast<size_t>(side) * side, 1);
  for (auto _ : state) {
    PerfusionSignal s = extract_series(stack, mask, Phase::Post, View::Ap);
    benchmark::DoNotOptimize(s.values.data());
  }
}
BENCHMARK(BM_SeriesExtraction)->Arg(64)->Arg(256);

void BM_GbmFit(benchmark::State& state) {
  const size_t n = static_cast<size_t>(state.range(0));
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::vector<double>> X;
  std::vector<int> y;
  for (size_t i = 0; i < n; ++i) {
    std::vector<double> row(18);
    for (double& v : row) v = unif(rng);
    y.push_back(row[0] + 0.2 * unif(rng) > 0.6 ? 1 : 0);
    X.push_back(std::move(row));
  }
  y[0] = 1;
  y[1] = 0;
  for (auto _ : state) {
    GbmModel model = fit_gbm(X, y, {});
    benchmark::DoNotOptimize(model.trees.data());
  }
}
BENCHMARK(BM_GbmFit)->Arg(39)->Arg(200);

void BM_MannWhitney(benchmark::State& state) {
  const size_t n = static_cast<size_t>(state.range(0));
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> a(n), b(n);
  for (double& v : a) v = unif(rng);
  for (double& v : b) v = unif(rng) + 0.1;
  for (auto _ : state) {
    stats::TestResult r = stats::mann_whitney_u(a, b, stats::Alternative::TwoSided);
    benchmark::DoNotOptimize(r.p_value);
  }
}
BENCHMARK(BM_MannWhitney)->Arg(8)->Arg(10)->Arg(50);

void BM_Loocv(benchmark::State& state) {
  SynthConfig cfg;
  cfg.n_patients = static_cast<int>(state.range(0));
  cfg.prevalence = 0.25;
  cfg.seed = 5;
  SignalCohort cohort = generate_cohort(cfg);
  FeatureConfig fc;
  fc.mode = FeatureMode::PostOnly;
  fc.groups = {FeatureGroup::Sips, FeatureGroup::Flow};
  for (auto _ : state) {
    EvaluationReport report = loocv(cohort, fc, {});
    benchmark::DoNotOptimize(report.metrics.auroc);
  }
}
BENCHMARK(BM_Loocv)->Arg(20)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
