#pragma once

#include <cstddef>
#include <limits>
#include <string_view>
#include <vector>

#include "reclink/encoder.hpp"

namespace reclink {

enum class ClusterAlgorithm { kSlink, kDbscan, kAgglomerative };
enum class LinkageMode { kSingle, kComplete, kAverage };

struct ClusterParams {
  ClusterAlgorithm algorithm = ClusterAlgorithm::kSlink;
  // Cosine-distance cut for slink/agglomerative: pairs at distance <= threshold
  // merge. 0.3 corresponds to similarity 0.7.
  double threshold = 0.3;
  LinkageMode linkage = LinkageMode::kSingle;
  double eps = 0.3;  // dbscan neighbourhood radius (cosine distance)
  std::size_t min_samples = 2;

  void validate() const;
};

ClusterAlgorithm parse_cluster_algorithm(std::string_view name);
LinkageMode parse_linkage_mode(std::string_view name);

struct ClusterAssignment {
  std::vector<RowId> row_ids;          // input order
  std::vector<std::size_t> labels;     // cluster id per row
  std::vector<RowId> representatives;  // per cluster id: lowest row id

  std::size_t num_clusters() const { return representatives.size(); }
};

// 1 - <a, b> computed with the shared inner-product kernel.
double cosine_distance(std::span<const float> a, std::span<const float> b);

// Sibson's pointer representation: height[i] is the distance at which point i
// stops being the last member of its cluster and parent[i] (> i) is the
// last member at that height. The last point has infinite height.
struct PointerRepresentation {
  std::vector<std::size_t> parent;
  std::vector<double> height;
};

// SLINK over the given rows (all assumed valid). O(n^2) time, O(n) memory.
PointerRepresentation slink(const EmbeddingMatrix& embeddings,
                            std::span<const std::size_t> rows);

// Turns "same group" labels into canonical cluster ids: clusters numbered by
// their lowest row id. Returns the relabelled assignment.
ClusterAssignment canonicalize(std::span<const RowId> row_ids,
                               std::span<const std::size_t> group_of_row);

// Partitions every row. Invalid rows always end up as singletons.
ClusterAssignment cluster(const EmbeddingMatrix& embeddings,
                          const ClusterParams& params);

}  // namespace reclink
