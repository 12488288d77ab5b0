#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "reclink/train.hpp"

namespace {

reclink::Matrix<double> unit_rows(std::size_t n, std::size_t dim) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  reclink::Matrix<double> z(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0;
    for (auto& x : z.row(i)) sq += (x = g(rng)) * x;
    for (auto& x : z.row(i)) x /= std::sqrt(sq);
  }
  return z;
}

void BM_SupConLoss(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto z = unit_rows(n, 256);
  std::vector<std::size_t> classes(n);
  for (std::size_t i = 0; i < n; ++i) classes[i] = i / 2;
  for (auto _ : state) {
    benchmark::DoNotOptimize(reclink::supcon_loss(z, classes, 0.07));
  }
}
BENCHMARK(BM_SupConLoss)->Arg(64)->Arg(128);

void BM_BatchLoss(benchmark::State& state) {
  reclink::EncoderConfig config;
  const auto model = reclink::EncoderModel::initialize(config);
  reclink::TrainingBatch batch;
  for (std::size_t i = 0; i < 64; ++i) {
    batch.texts.push_back("Firm " + std::to_string(i / 2) + (i % 2 ? " Inc" : " Incorporated"));
    batch.classes.push_back(i / 2);
  }
  const reclink::TrainConfig train_config;
  for (auto _ : state) {
    benchmark::DoNotOptimize(reclink::batch_loss(model, batch, train_config));
  }
}
BENCHMARK(BM_BatchLoss)->Unit(benchmark::kMillisecond);

}  // namespace
