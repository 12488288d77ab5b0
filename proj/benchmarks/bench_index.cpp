#include <benchmark/benchmark.h>

#include <random>

#include "reclink/index.hpp"

namespace {

reclink::EmbeddingMatrix random_rows(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  reclink::EmbeddingMatrix m(n, dim);
  std::vector<double> v(dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& x : v) x = g(rng);
    m.set_row(i, static_cast<reclink::RowId>(i), v);
  }
  return m;
}

void BM_FlatSearch(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto dim = static_cast<std::size_t>(state.range(1));
  const auto keys = random_rows(n, dim, 1);
  const auto queries = random_rows(256, dim, 2);
  const auto index = reclink::VectorIndex::build(keys);
  for (auto _ : state) {
    benchmark::DoNotOptimize(index.search(queries, 10));
  }
  state.SetItemsProcessed(state.iterations() * 256 * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_FlatSearch)->Args({1000, 64})->Args({10000, 64})->Args({10000, 256});

void BM_InnerProduct(benchmark::State& state) {
  const auto rows = random_rows(2, static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(reclink::inner_product(rows.vector(0), rows.vector(1)));
  }
}
BENCHMARK(BM_InnerProduct)->Arg(64)->Arg(256)->Arg(1024);

}  // namespace
