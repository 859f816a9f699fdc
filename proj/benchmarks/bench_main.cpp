#include <benchmark/benchmark.h>

#include "fixtures.hpp"
#include "reidrank/kreciprocal.hpp"
#include "reidrank/metric_space.hpp"
#include "reidrank/retrieval_eval.hpp"

namespace {

using namespace reidrank;

void BM_PairwiseEuclidean(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = testing::random_set(1, n, 128);
  const auto b = testing::random_set(2, n, 128);
  const auto metric = MetricConfig::euclidean();
  for (auto _ : state) benchmark::DoNotOptimize(pairwise_matrix(a, b, metric, 1));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}
BENCHMARK(BM_PairwiseEuclidean)->Arg(128)->Arg(512);

void BM_PairwiseMahalanobis(benchmark::State& state) {
  const auto a = testing::random_set(1, 256, 32);
  const auto metric = MetricConfig::mahalanobis(Matrix::identity(32));
  for (auto _ : state) benchmark::DoNotOptimize(pairwise_matrix(a, a, metric, 1));
}
BENCHMARK(BM_PairwiseMahalanobis);

void BM_GalleryNeighborhood(benchmark::State& state) {
  const auto gallery = testing::random_set(3, static_cast<std::size_t>(state.range(0)), 64);
  const auto metric = MetricConfig::euclidean();
  for (auto _ : state) benchmark::DoNotOptimize(GalleryNeighborhood::build(gallery, metric, 20, 1));
}
BENCHMARK(BM_GalleryNeighborhood)->Arg(256)->Arg(1024);

void BM_Rerank(benchmark::State& state) {
  const auto probes = testing::random_set(4, 32, 64);
  const auto gallery = testing::random_set(5, static_cast<std::size_t>(state.range(0)), 64);
  const auto metric = MetricConfig::euclidean();
  for (auto _ : state) {
    benchmark::DoNotOptimize(rerank(probes, gallery, metric, {20, 0.3, 2.0 / 3.0}, {1, false}));
  }
}
BENCHMARK(BM_Rerank)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_AveragePrecision(benchmark::State& state) {
  const auto n = static_cast<std::uint32_t>(state.range(0));
  RankList list{0, {}};
  GroundTruth truth;
  for (std::uint32_t i = 0; i < n; ++i) {
    list.entries.push_back({(i * 7919u) % n, double(i)});
    if (i % 50 == 0) truth.relevant.push_back(i);
  }
  for (auto _ : state) benchmark::DoNotOptimize(average_precision(list, truth));
}
BENCHMARK(BM_AveragePrecision)->Arg(1000)->Arg(20000);

}  // namespace

BENCHMARK_MAIN();
