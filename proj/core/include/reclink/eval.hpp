#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "reclink/link_result.hpp"

namespace reclink {

struct GoldLink {
  RowId query = 0;
  RowId key = 0;
};

using GoldLinks = std::vector<GoldLink>;

struct EvalReport {
  std::string metric;
  double value = 0.0;
  std::size_t support = 0;  // queries (top1) or labelled pairs (pairwise)
  std::size_t correct = 0;  // top1 only
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  double precision = 0.0;
  double recall = 0.0;
  std::optional<double> threshold;

  // metric=top1_accuracy value=0.5 support=4 ...
  std::string to_key_value() const;
  std::string to_json_line() const;
};

// Fraction of gold queries whose rank-1 match is one of their gold keys.
// Throws UserError when a gold query is absent from the result.
EvalReport top1_accuracy(const LinkResult& result, const GoldLinks& gold);

// Predict match iff score >= threshold. F1 = 0 when precision+recall = 0.
EvalReport pairwise_f1(std::span<const double> scores,
                       std::span<const int> labels, double threshold);

}  // namespace reclink
