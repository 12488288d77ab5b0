#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "reclink/cluster.hpp"
#include "reclink/encoder.hpp"
#include "reclink/index.hpp"
#include "reclink/link_result.hpp"
#include "reclink/tabular.hpp"
#include "reclink/textprep.hpp"

namespace reclink {

enum class MergeType { kOneToOne, kOneToMany, kManyToOne, kManyToMany };

MergeType parse_merge_type(std::string_view text);  // "1:1", "1:m", "m:1", "m:m"
std::string_view to_string(MergeType type);

inline constexpr std::string_view kRightPrefix = "right_";
inline constexpr std::string_view kScoreColumn = "score";

struct MergeSpec {
  MergeType merge_type = MergeType::kManyToOne;
  std::optional<ColumnSelector> on;
  std::optional<ColumnSelector> left_on;
  std::optional<ColumnSelector> right_on;
  std::size_t k = 1;
  std::optional<double> threshold;  // cosine similarity cut, score >= threshold
  std::optional<ColumnSelector> blocking;
  SeparatorSpec separator;
  SearchOptions search;

  // Exactly one of {on} / {left_on, right_on}; 1:1 requires k == 1.
  void validate() const;
  const ColumnSelector& left_selector() const;
  const ColumnSelector& right_selector() const;
};

struct MergeOutput {
  Table table;
  LinkResult links;
};

// Embeds the key side, indexes it and retrieves neighbours for the query
// side. m:1 and m:m query with left rows against right keys; 1:m swaps the
// roles. Output rows: query columns (left first) + "right_"-prefixed right
// columns + score; unmatched queries keep empty right cells.
MergeOutput merge(const Table& left, const Table& right, const MergeSpec& spec,
                  EmbeddingProvider& provider);

struct ThresholdChoice {
  double threshold = 0.0;
  double f1 = 0.0;
};

inline constexpr double kThresholdEpsilon = 1e-6;

// Threshold maximizing F1 of "match iff score >= threshold" over midpoints
// of adjacent distinct scores plus min - eps and max + eps. Ties go to the
// lowest threshold. Throws UserError without positives or on size mismatch.
ThresholdChoice tune_threshold(std::span<const double> scores,
                               std::span<const int> labels);

struct DedupOutput {
  Table table;
  ClusterAssignment assignment;
};

// Keeps the lowest row id of every cluster, in original order.
DedupOutput dedup(const Table& table, const ColumnSelector& on,
                  EmbeddingProvider& provider, const ClusterParams& params,
                  const SeparatorSpec& sep = {});

// Maps every fine row to its k nearest coarse rows (m:m-style, one output
// row per pair, no threshold unless given).
MergeOutput aggregate_rows(const Table& fine, const Table& coarse,
                           const ColumnSelector& fine_on,
                           const ColumnSelector& coarse_on,
                           EmbeddingProvider& provider, std::size_t k,
                           std::optional<double> threshold = std::nullopt);

}  // namespace reclink
