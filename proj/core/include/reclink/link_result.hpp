#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "reclink/tabular.hpp"

namespace reclink {

enum class UnmatchedReason {
  kBelowThreshold,
  kEmptyBlock,
  kInvalidEmbedding,
  // 1:1 only: every candidate key was claimed by a higher-scoring pair.
  kAssignmentConflict,
};

std::string_view to_string(UnmatchedReason reason);
std::optional<UnmatchedReason> parse_unmatched_reason(std::string_view text);

struct Match {
  RowId query = 0;
  RowId key = 0;
  double score = 0.0;
  int rank = 1;  // 1-based

  friend bool operator==(const Match&, const Match&) = default;
};

struct Unmatched {
  RowId query = 0;
  UnmatchedReason reason = UnmatchedReason::kBelowThreshold;

  friend bool operator==(const Unmatched&, const Unmatched&) = default;
};

// Ranked candidates per query plus the queries that received none.
// Matches are ordered by query, then rank.
struct LinkResult {
  std::vector<Match> matches;
  std::vector<Unmatched> unmatched;

  friend bool operator==(const LinkResult&, const LinkResult&) = default;
};

}  // namespace reclink
