#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "reclink/encoder.hpp"
#include "reclink/textprep.hpp"

namespace {

const std::vector<std::string> kNames = {
    "Acme Corporation International", "ACME Corp Intl", "Globex Holdings Limited",
    "Globex Hldgs Ltd", "株式会社日本製鉄", "Société Générale de Transport"};

void BM_Levenshtein(benchmark::State& state) {
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        reclink::levenshtein(kNames[i % kNames.size()], kNames[(i + 1) % kNames.size()]));
    ++i;
  }
}
BENCHMARK(BM_Levenshtein);

void BM_Featurize(benchmark::State& state) {
  reclink::EncoderConfig config;
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(reclink::featurize(kNames[i++ % kNames.size()], config));
  }
}
BENCHMARK(BM_Featurize);

void BM_BuiltinEmbed(benchmark::State& state) {
  reclink::EncoderConfig config;
  config.embed_dim = static_cast<std::size_t>(state.range(0));
  const auto model = reclink::EncoderModel::initialize(config);
  std::vector<reclink::SerializedRecord> records;
  for (std::size_t i = 0; i < 512; ++i) {
    records.push_back({static_cast<reclink::RowId>(i), kNames[i % kNames.size()] + std::to_string(i)});
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(reclink::embed_batch(model, records));
  }
  state.SetItemsProcessed(state.iterations() * 512);
}
BENCHMARK(BM_BuiltinEmbed)->Arg(64)->Arg(256);

}  // namespace
