#include "reclink/cluster.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <map>
#include <numeric>

#include "reclink/error.hpp"
#include "reclink/index.hpp"

namespace reclink {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a), b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

std::vector<std::size_t> valid_rows(const EmbeddingMatrix& e) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (e.valid(i)) rows.push_back(i);
  }
  return rows;
}

// Groups for the valid rows from the chosen algorithm; `group[i]` indexes
// into `rows`.
std::vector<std::size_t> slink_groups(const EmbeddingMatrix& e,
                                      std::span<const std::size_t> rows,
                                      double threshold) {
  const auto ptr = slink(e, rows);
  DisjointSets sets(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (ptr.height[i] <= threshold) sets.unite(i, ptr.parent[i]);
  }
  std::vector<std::size_t> group(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) group[i] = sets.find(i);
  return group;
}

std::vector<std::size_t> agglomerative_groups(const EmbeddingMatrix& e,
                                              std::span<const std::size_t> rows,
                                              double threshold, LinkageMode mode) {
  const std::size_t n = rows.size();
  // Cluster-to-cluster distances, updated with Lance-Williams rules.
  Matrix<double> dist(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      dist(i, j) = i == j ? 0.0 : cosine_distance(e.vector(rows[i]), e.vector(rows[j]));
    }
  }
  std::vector<std::size_t> size(n, 1);
  std::vector<bool> alive(n, true);
  DisjointSets sets(n);

  for (std::size_t merges = 0; merges + 1 < n; ++merges) {
    double best = kInf;
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (alive[j] && dist(i, j) < best) best = dist(i, j), bi = i, bj = j;
      }
    }
    if (!(best <= threshold)) break;

    for (std::size_t m = 0; m < n; ++m) {
      if (!alive[m] || m == bi || m == bj) continue;
      double d = 0.0;
      switch (mode) {
        case LinkageMode::kSingle: d = std::min(dist(bi, m), dist(bj, m)); break;
        case LinkageMode::kComplete: d = std::max(dist(bi, m), dist(bj, m)); break;
        case LinkageMode::kAverage:
          d = (static_cast<double>(size[bi]) * dist(bi, m) +
               static_cast<double>(size[bj]) * dist(bj, m)) /
              static_cast<double>(size[bi] + size[bj]);
          break;
      }
      dist(bi, m) = dist(m, bi) = d;
    }
    size[bi] += size[bj];
    alive[bj] = false;
    sets.unite(bi, bj);
  }
  std::vector<std::size_t> group(n);
  for (std::size_t i = 0; i < n; ++i) group[i] = sets.find(i);
  return group;
}

std::vector<std::size_t> dbscan_groups(const EmbeddingMatrix& e,
                                       std::span<const std::size_t> rows, double eps,
                                       std::size_t min_samples) {
  const std::size_t n = rows.size();
  std::vector<std::vector<std::size_t>> neighbours(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || cosine_distance(e.vector(rows[i]), e.vector(rows[j])) <= eps) {
        neighbours[i].push_back(j);
      }
    }
  }
  std::vector<bool> core(n);
  for (std::size_t i = 0; i < n; ++i) core[i] = neighbours[i].size() >= min_samples;

  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> label(n, kNone);
  // Expand density-connected components of core points.
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (!core[seed] || label[seed] != kNone) continue;
    std::deque<std::size_t> frontier{seed};
    label[seed] = seed;
    while (!frontier.empty()) {
      const auto p = frontier.front();
      frontier.pop_front();
      for (auto q : neighbours[p]) {
        if (core[q] && label[q] == kNone) {
          label[q] = seed;
          frontier.push_back(q);
        }
      }
    }
  }
  // Border points join their nearest core neighbour (ties: lower row id),
  // which keeps the partition independent of input order.
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    double best = kInf;
    std::size_t best_core = kNone;
    for (auto j : neighbours[i]) {
      if (!core[j]) continue;
      const double d = cosine_distance(e.vector(rows[i]), e.vector(rows[j]));
      if (best_core == kNone || d < best ||
          (d == best && e.row_id(rows[j]) < e.row_id(rows[best_core]))) {
        best = d;
        best_core = j;
      }
    }
    label[i] = best_core == kNone ? i : label[best_core];
  }
  return label;
}

}  // namespace

void ClusterParams::validate() const {
  if (!(threshold >= 0.0 && threshold <= 2.0)) {
    throw UserError("cluster threshold must be a cosine distance in [0, 2]");
  }
  if (!(eps >= 0.0 && eps <= 2.0)) throw UserError("dbscan eps must be in [0, 2]");
  if (min_samples < 1) throw UserError("dbscan min_samples must be >= 1");
}

ClusterAlgorithm parse_cluster_algorithm(std::string_view name) {
  if (name == "slink") return ClusterAlgorithm::kSlink;
  if (name == "dbscan") return ClusterAlgorithm::kDbscan;
  if (name == "agglomerative") return ClusterAlgorithm::kAgglomerative;
  throw UserError("unknown cluster algorithm '" + std::string(name) +
                  "' (expected slink, dbscan or agglomerative)");
}

LinkageMode parse_linkage_mode(std::string_view name) {
  if (name == "single") return LinkageMode::kSingle;
  if (name == "complete") return LinkageMode::kComplete;
  if (name == "average") return LinkageMode::kAverage;
  throw UserError("unknown linkage '" + std::string(name) +
                  "' (expected single, complete or average)");
}

double cosine_distance(std::span<const float> a, std::span<const float> b) {
  return 1.0 - inner_product(a, b);
}

PointerRepresentation slink(const EmbeddingMatrix& embeddings,
                            std::span<const std::size_t> rows) {
  const std::size_t n = rows.size();
  PointerRepresentation out;
  out.parent.resize(n);
  out.height.assign(n, kInf);
  std::vector<double> m(n);
  auto& pi = out.parent;
  auto& lambda = out.height;

  for (std::size_t i = 0; i < n; ++i) {
    pi[i] = i;
    lambda[i] = kInf;
    const auto vi = embeddings.vector(rows[i]);
    for (std::size_t j = 0; j < i; ++j) m[j] = cosine_distance(embeddings.vector(rows[j]), vi);
    for (std::size_t j = 0; j < i; ++j) {
      if (lambda[j] >= m[j]) {
        m[pi[j]] = std::min(m[pi[j]], lambda[j]);
        lambda[j] = m[j];
        pi[j] = i;
      } else {
        m[pi[j]] = std::min(m[pi[j]], m[j]);
      }
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (lambda[j] >= lambda[pi[j]]) pi[j] = i;
    }
  }
  return out;
}

ClusterAssignment canonicalize(std::span<const RowId> row_ids,
                               std::span<const std::size_t> group_of_row) {
  // Lowest row id per group, then number groups in that order.
  std::map<std::size_t, RowId> lowest;
  for (std::size_t i = 0; i < row_ids.size(); ++i) {
    auto [it, inserted] = lowest.try_emplace(group_of_row[i], row_ids[i]);
    if (!inserted) it->second = std::min(it->second, row_ids[i]);
  }
  std::vector<std::pair<RowId, std::size_t>> order;
  order.reserve(lowest.size());
  for (auto [g, rep] : lowest) order.emplace_back(rep, g);
  std::sort(order.begin(), order.end());

  std::map<std::size_t, std::size_t> cluster_of_group;
  ClusterAssignment out;
  for (auto [rep, g] : order) {
    cluster_of_group[g] = out.representatives.size();
    out.representatives.push_back(rep);
  }
  out.row_ids.assign(row_ids.begin(), row_ids.end());
  out.labels.reserve(row_ids.size());
  for (std::size_t i = 0; i < row_ids.size(); ++i) {
    out.labels.push_back(cluster_of_group.at(group_of_row[i]));
  }
  return out;
}

ClusterAssignment cluster(const EmbeddingMatrix& embeddings, const ClusterParams& params) {
  params.validate();
  const auto rows = valid_rows(embeddings);

  std::vector<std::size_t> sub;
  switch (params.algorithm) {
    case ClusterAlgorithm::kSlink:
      sub = slink_groups(embeddings, rows, params.threshold);
      break;
    case ClusterAlgorithm::kAgglomerative:
      sub = agglomerative_groups(embeddings, rows, params.threshold, params.linkage);
      break;
    case ClusterAlgorithm::kDbscan:
      sub = dbscan_groups(embeddings, rows, params.eps, params.min_samples);
      break;
  }

  // Valid rows use their group's first row index; invalid rows are their own
  // group. Both are row indices into `embeddings`, so they never collide.
  std::vector<std::size_t> group(embeddings.size());
  std::iota(group.begin(), group.end(), std::size_t{0});
  for (std::size_t i = 0; i < rows.size(); ++i) group[rows[i]] = rows[sub[i]];
  return canonicalize(embeddings.row_ids(), group);
}

}  // namespace reclink
