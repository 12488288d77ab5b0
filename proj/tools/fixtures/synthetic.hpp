#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "reclink/tabular.hpp"

namespace reclink::fixtures {

// A firm with its canonical name and perturbed aliases.
struct Firm {
  std::string id;
  std::string canonical;
  std::vector<std::string> aliases;
};

struct AliasBenchmark {
  std::vector<Firm> train;
  std::vector<Firm> validation;
  std::vector<Firm> test;
};

struct AliasBenchmarkOptions {
  std::size_t entities = 200;
  std::size_t aliases_per_entity = 3;
  std::size_t train_entities = 100;
  std::size_t validation_entities = 40;  // the rest is the held-out test split
  std::uint64_t seed = 20230822;
};

// Canonical firm names from pseudo-word stems, industry words and legal
// suffixes; aliases apply abbreviations, token drops, token swaps and
// character-level typos.
AliasBenchmark make_alias_benchmark(const AliasBenchmarkOptions& options = {});

// Near-duplicate records: `variants` light perturbations (typos and
// abbreviations only) of each of `entities` names. Returns the rows and
// their ground-truth entity ids.
struct PlantedPartition {
  std::vector<std::string> texts;
  std::vector<std::size_t> truth;
};
PlantedPartition make_planted_partition(std::size_t entities, std::size_t variants,
                                        std::uint64_t seed);

// Table views used by the CLI and the committed data files.
// cluster rows: columns cluster_id,text (canonical first, then aliases)
Table cluster_rows_table(const std::vector<Firm>& firms);
// keys: columns key_id,firm_id,name ; queries: query_id,firm_id,name ;
// gold: query_id,key_id
Table keys_table(const std::vector<Firm>& firms);
Table queries_table(const std::vector<Firm>& firms);
Table gold_table(const std::vector<Firm>& firms);

}  // namespace reclink::fixtures
