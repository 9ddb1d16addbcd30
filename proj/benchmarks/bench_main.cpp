// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>

#include "imuloc/csi/csi.hpp"
#include "imuloc/eval/eval.hpp"
#include "imuloc/fit/fit.hpp"
#include "imuloc/model/mlp.hpp"
#include "imuloc/model/model.hpp"

namespace {

using namespace imuloc;

fit::Segment random_segment(std::size_t steps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.3);
  fit::Segment s;
  s.dt.assign(steps, 0.16);
  s.accel = RowMatrix(static_cast<Eigen::Index>(steps), 2);
  for (Eigen::Index i = 0; i < s.accel.size(); ++i) s.accel.data()[i] = g(rng);
  s.x_start = Vector::Zero(2);
  s.v_start = Vector::Zero(2);
  s.x_end = Vector::Constant(2, 1.0);
  s.v_end = Vector::Zero(2);
  return s;
}

void BM_FbLossGradient(benchmark::State& state) {
  const auto seg = random_segment(static_cast<std::size_t>(state.range(0)), 1);
  RowMatrix corr = RowMatrix::Zero(seg.accel.rows(), 2);
  RowMatrix grad;
  for (auto _ : state) {
    auto terms = fit::fb_loss(seg, corr, fit::LossWeights{}, nullptr, &grad);
    benchmark::DoNotOptimize(terms.total);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FbLossGradient)->Arg(100)->Arg(1000)->Arg(10000);

void BM_FitSegment(benchmark::State& state) {
  const auto seg = random_segment(static_cast<std::size_t>(state.range(0)), 2);
  fit::FitConfig config;
  config.steps = 200;
  for (auto _ : state) {
    auto r = fit::fit_segment(seg, config, 7);
    benchmark::DoNotOptimize(r.final.total);
  }
}
BENCHMARK(BM_FitSegment)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_MlpForwardBackward(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  model::MlpF net({288, 128, 64, 3});
  net.initialize(3);
  RowMatrixF x = RowMatrixF::Random(batch, 288);
  RowMatrixF grad_out = RowMatrixF::Random(batch, 3);
  model::MlpF::Buffer grad(net.parameters().size());
  model::MlpF::Cache cache;
  for (auto _ : state) {
    net.forward(x, &cache);
    std::fill(grad.begin(), grad.end(), 0.0f);
    net.backward(cache, grad_out, grad);
    benchmark::DoNotOptimize(grad.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpForwardBackward)->Arg(128)->Arg(256);

void BM_KnnPredict(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  RowMatrixF train = RowMatrixF::Random(n, 288);
  RowMatrixF queries = RowMatrixF::Random(100, 288);
  RowMatrix labels = RowMatrix::Random(n, 2);
  const model::KnnModel knn{train, labels, 7};
  for (auto _ : state) {
    auto p = model::knn_predict(knn, queries);
    benchmark::DoNotOptimize(p.data());
  }
}
BENCHMARK(BM_KnnPredict)->Arg(1000)->Arg(9000)->Unit(benchmark::kMillisecond);

void BM_CfrToCir(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  std::vector<std::complex<double>> cfr(static_cast<std::size_t>(state.range(0)));
  for (auto& c : cfr) c = {g(rng), g(rng)};
  for (auto _ : state) {
    auto cir = csi::cfr_to_cir(cfr);
    benchmark::DoNotOptimize(cir.data());
  }
}
BENCHMARK(BM_CfrToCir)->Arg(1584)->Arg(4096);

void BM_RtsSmooth(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  RowMatrix y = RowMatrix::Random(n, 2);
  std::vector<double> t(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.16 * static_cast<double>(i);
  for (auto _ : state) {
    auto s = eval::rts_smooth(y, t, eval::SmootherConfig{});
    benchmark::DoNotOptimize(s.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RtsSmooth)->Arg(1000)->Arg(10000);

}  // namespace
BENCHMARK_MAIN();
