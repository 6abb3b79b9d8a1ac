#include <cmath>
#include <random>

#include <benchmark/benchmark.h>

#include "rembo/acquisition.hpp"
#include "rembo/embedding.hpp"
#include "rembo/gp.hpp"
#include "rembo/hyperopt.hpp"
#include "rembo/inner_opt.hpp"

namespace {

using namespace rembo;

Dataset random_data(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.4, 1.4);
  Dataset data;
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXd p(static_cast<Eigen::Index>(dim));
    for (auto& v : p) v = u(rng);
    data.add(p, std::sin(3.0 * p(0)) + p.squaredNorm());
  }
  return data;
}

const KernelSpec kSe = KernelSpec::low_dim_se(LengthScale(0.3));

void BM_GpFit(benchmark::State& state) {
  const auto data = random_data(static_cast<std::size_t>(state.range(0)), 2, 1);
  for (auto _ : state) benchmark::DoNotOptimize(GpModel::fit(data, kSe, 1e-6).alpha());
}
BENCHMARK(BM_GpFit)->Arg(50)->Arg(125)->Arg(500);

void BM_GpPredict(benchmark::State& state) {
  const auto model = GpModel::fit(random_data(static_cast<std::size_t>(state.range(0)), 2, 1), kSe, 1e-6);
  const Eigen::Vector2d q(0.1, -0.2);
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(q).variance);
}
BENCHMARK(BM_GpPredict)->Arg(50)->Arg(125)->Arg(500);

void BM_FitLengthScale(benchmark::State& state) {
  const auto data = random_data(static_cast<std::size_t>(state.range(0)), 2, 2);
  for (auto _ : state) benchmark::DoNotOptimize(fit_length_scale(data, kSe, 1e-6, 0.01, 50.0));
}
BENCHMARK(BM_FitLengthScale)->Arg(50)->Arg(125)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_DirectBranin(benchmark::State& state) {
  const auto branin = [](const Eigen::VectorXd& x) {
    const double a = x(1) - 5.1 / (4.0 * M_PI * M_PI) * x(0) * x(0) + 5.0 / M_PI * x(0) - 6.0;
    return -(a * a + 10.0 * (1.0 - 1.0 / (8.0 * M_PI)) * std::cos(x(0)) + 10.0);
  };
  const Box box(Eigen::Vector2d(-5.0, 0.0), Eigen::Vector2d(10.0, 15.0));
  InnerOptBudget budget;
  budget.max_evals = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(direct_maximize(branin, box, budget).value);
}
BENCHMARK(BM_DirectBranin)->Arg(500)->Arg(2000);

void BM_LazyRow(benchmark::State& state) {
  const auto emb = Embedding::draw(1'000'000'000, 2, 7);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(emb.row(i++ * 7919 % 1'000'000'000).sum());
}
BENCHMARK(BM_LazyRow);

void BM_MaximizeAcquisition(benchmark::State& state) {
  const auto model = GpModel::fit(random_data(static_cast<std::size_t>(state.range(0)), 2, 3), kSe, 1e-6);
  const Box box = Box::cube(2, -std::sqrt(2.0), std::sqrt(2.0));
  const Incumbent inc{Eigen::Vector2d::Zero(), 2.0};
  InnerOptBudget budget;
  budget.max_evals = 500;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(maximize_acquisition(model, AcquisitionSpec{}, box, inc, budget, seed++).value);
  }
}
BENCHMARK(BM_MaximizeAcquisition)->Arg(50)->Arg(125)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
