// Serial reference vs OpenMP accumulation of the logit score and information.

#include <benchmark/benchmark.h>

#include <cmath>

#include "kgap/common/rng.hpp"
#include "kgap/glmfit.hpp"

using namespace kgap;
using namespace kgap::glmfit;

namespace {

struct Problem {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  Eigen::VectorXd theta;
};

// Intercept, one covariate and year dummies, like a fixed-effects panel.
Problem panel(Eigen::Index n, Eigen::Index years) {
  Rng rng(42);
  const Eigen::Index p = 2 + years - 1;
  Problem pr{Eigen::MatrixXd::Zero(n, p), Eigen::VectorXd(n), Eigen::VectorXd::Zero(p)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = rng.normal();
    const auto year = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(years)));
    pr.x(i, 0) = 1.0;
    pr.x(i, 1) = x;
    if (year > 0) pr.x(i, 1 + year) = 1.0;
    pr.y(i) = rng.bernoulli(1.0 / (1.0 + std::exp(1.0 - 0.8 * x))) ? 1.0 : 0.0;
  }
  pr.theta(0) = -1.0;
  pr.theta(1) = 0.8;
  return pr;
}

void BM_AccumulateSerial(benchmark::State& state) {
  const auto pr = panel(state.range(0), state.range(1));
  for (auto _ : state) {
    auto a = kernels::accumulate_serial(pr.x, pr.y, pr.theta);
    benchmark::DoNotOptimize(a.information.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_AccumulateParallel(benchmark::State& state) {
  const auto pr = panel(state.range(0), state.range(1));
  for (auto _ : state) {
    auto a = kernels::accumulate_parallel(pr.x, pr.y, pr.theta);
    benchmark::DoNotOptimize(a.information.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_FitLogit(benchmark::State& state) {
  const auto pr = panel(state.range(0), state.range(1));
  DesignMatrix d;
  d.x = pr.x;
  d.response = pr.y;
  for (Eigen::Index j = 0; j < pr.x.cols(); ++j) d.column_names.push_back("c" + std::to_string(j));
  FitOptions o;
  o.kernel = state.range(2) == 0 ? Kernel::serial : Kernel::parallel;
  for (auto _ : state) {
    auto fit = fit_logit(d, o);
    benchmark::DoNotOptimize(fit.log_likelihood);
  }
  state.SetLabel(state.range(2) == 0 ? "serial" : "parallel");
}

}  // namespace

BENCHMARK(BM_AccumulateSerial)->ArgsProduct({{10'000, 100'000, 1'000'000}, {20}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AccumulateParallel)->ArgsProduct({{10'000, 100'000, 1'000'000}, {20}})->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_FitLogit)->ArgsProduct({{200'000}, {20}, {0, 1}})->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
