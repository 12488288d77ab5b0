#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "reclink/cluster.hpp"
#include "reclink/encoder.hpp"
#include "reclink/linkage.hpp"
#include "reclink/train.hpp"

namespace reclink::cli {

enum class Subcommand { kMerge, kDedup, kAggregate, kTrain, kTuneThreshold, kEval };

enum class EvalMetric { kTop1, kPairwiseF1 };

// Which of the three training table layouts --input/--val use.
enum class TrainLayout { kClusterRows, kPositivePairs, kLabeledPairs };

struct TrainOptions {
  TrainLayout layout = TrainLayout::kClusterRows;
  std::string cluster_id_col;
  std::string label_col;
  std::optional<std::filesystem::path> config_path;  // read by run()
  std::optional<std::size_t> epochs;
  std::optional<double> max_lr;
  // Fresh-encoder overrides; config-file keys fill whatever is unset.
  std::optional<std::size_t> hash_buckets;
  std::optional<std::size_t> embed_dim;
  std::optional<std::size_t> ngram_min;
  std::optional<std::size_t> ngram_max;
};

struct EvalOptions {
  EvalMetric metric = EvalMetric::kTop1;
  std::filesystem::path gold;
  std::string score_col = "score";
  std::string label_col = "label";
};

struct CommandPlan {
  Subcommand subcommand = Subcommand::kMerge;

  std::filesystem::path left;
  std::filesystem::path right;
  std::filesystem::path input;
  std::filesystem::path val;

  MergeSpec merge;          // merge, aggregate, tune-threshold (selectors)
  ColumnSelector on;        // dedup
  ClusterParams cluster;    // dedup
  TrainOptions train;
  EvalOptions eval;
  std::optional<double> threshold;

  std::optional<ProviderSpec> provider;
  std::string api_key;  // resolved from the environment for remote specs
  std::optional<std::uint64_t> seed;

  std::optional<std::filesystem::path> out;  // absent: data to stdout
  std::optional<std::filesystem::path> audit_out;
  std::optional<std::filesystem::path> report_out;
};

// Set when --help was requested; the text goes to stdout and the exit code
// is 0.
struct HelpRequested {
  std::string text;
};

// Builds a fully resolved plan from argv (without the program name). Reads
// nothing but `env`. Throws UserError naming the offending flag, or
// HelpRequested.
CommandPlan parse_and_validate(const std::vector<std::string>& args,
                               const EnvLookup& env = process_env);

// Parses a --model value: builtin:<path>, builtin: or remote:<model>@<url>.
ProviderSpec parse_model_spec(std::string_view text);

}  // namespace reclink::cli
