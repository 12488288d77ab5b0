#include "oracles.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>

namespace reclink::oracle {

std::vector<std::vector<Scored>> brute_force_knn(const EmbeddingMatrix& keys,
                                                 const EmbeddingMatrix& queries,
                                                 std::size_t k) {
  std::vector<std::vector<Scored>> out(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    if (!queries.valid(q)) continue;
    std::vector<Scored> all;
    for (std::size_t j = 0; j < keys.size(); ++j) {
      if (!keys.valid(j)) continue;
      double s = 0.0;
      for (std::size_t c = 0; c < keys.dim(); ++c) {
        s += static_cast<double>(queries.vector(q)[c]) * static_cast<double>(keys.vector(j)[c]);
      }
      all.push_back({keys.row_id(j), s});
    }
    std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) {
      return a.score != b.score ? a.score > b.score : a.key < b.key;
    });
    if (all.size() > k) all.resize(k);
    out[q] = std::move(all);
  }
  return out;
}

std::size_t full_table_levenshtein(const std::u32string& a, const std::u32string& b) {
  std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) t[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) t[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = t[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      t[i][j] = std::min({t[i - 1][j] + 1, t[i][j - 1] + 1, sub});
    }
  }
  return t[a.size()][b.size()];
}

DistanceMatrix pairwise_cosine_distances(const EmbeddingMatrix& emb) {
  DistanceMatrix d(emb.size(), std::vector<double>(emb.size(), 0.0));
  for (std::size_t i = 0; i < emb.size(); ++i) {
    for (std::size_t j = 0; j < emb.size(); ++j) {
      if (i != j) d[i][j] = cosine_distance(emb.vector(i), emb.vector(j));
    }
  }
  return d;
}

std::vector<std::size_t> canonical_labels(const std::vector<std::size_t>& labels) {
  std::map<std::size_t, std::size_t> rename;
  std::vector<std::size_t> out;
  for (auto l : labels) {
    auto [it, inserted] = rename.emplace(l, rename.size());
    out.push_back(it->second);
  }
  return out;
}

std::vector<std::size_t> naive_agglomerative(const DistanceMatrix& d, double threshold,
                                             LinkageMode linkage) {
  const std::size_t n = d.size();
  std::vector<std::vector<std::size_t>> clusters(n);
  for (std::size_t i = 0; i < n; ++i) clusters[i] = {i};
  auto link = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    double best = linkage == LinkageMode::kSingle ? std::numeric_limits<double>::infinity() : 0.0;
    double sum = 0.0;
    for (auto i : a) {
      for (auto j : b) {
        if (linkage == LinkageMode::kSingle) best = std::min(best, d[i][j]);
        else if (linkage == LinkageMode::kComplete) best = std::max(best, d[i][j]);
        else sum += d[i][j];
      }
    }
    if (linkage == LinkageMode::kAverage) return sum / static_cast<double>(a.size() * b.size());
    return best;
  };
  while (clusters.size() > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      for (std::size_t j = i + 1; j < clusters.size(); ++j) {
        const double v = link(clusters[i], clusters[j]);
        if (v < best) {
          best = v;
          bi = i;
          bj = j;
        }
      }
    }
    if (!(best <= threshold)) break;
    clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
  }
  std::vector<std::size_t> labels(n);
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    for (auto i : clusters[c]) labels[i] = c;
  }
  return canonical_labels(labels);
}

std::vector<std::size_t> naive_dbscan(const DistanceMatrix& d, double eps,
                                      std::size_t min_samples) {
  const std::size_t n = d.size();
  std::vector<bool> core(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t count = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || d[i][j] <= eps) ++count;
    }
    core[i] = count >= min_samples;
  }
  constexpr auto kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> label(n, kNone);
  std::size_t next = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (!core[s] || label[s] != kNone) continue;
    std::vector<std::size_t> stack{s};
    label[s] = next;
    while (!stack.empty()) {
      const auto i = stack.back();
      stack.pop_back();
      for (std::size_t j = 0; j < n; ++j) {
        if (core[j] && label[j] == kNone && d[i][j] <= eps) {
          label[j] = next;
          stack.push_back(j);
        }
      }
    }
    ++next;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    std::size_t nearest = kNone;
    for (std::size_t j = 0; j < n; ++j) {
      if (!core[j] || d[i][j] > eps) continue;
      if (nearest == kNone || d[i][j] < d[i][nearest]) nearest = j;
    }
    label[i] = nearest == kNone ? next++ : label[nearest];
  }
  return canonical_labels(label);
}

SweepResult exhaustive_threshold_sweep(const std::vector<double>& scores,
                                       const std::vector<int>& labels) {
  std::vector<double> cuts = scores;
  cuts.push_back(std::numeric_limits<double>::infinity());
  SweepResult best;
  bool first = true;
  for (double t : cuts) {
    SweepResult r;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const bool predicted = scores[i] >= t;
      if (predicted && labels[i] == 1) ++r.tp;
      else if (predicted) ++r.fp;
      else if (labels[i] == 1) ++r.fn;
    }
    const auto denom = 2 * r.tp + r.fp + r.fn;
    r.f1 = denom == 0 ? 0.0 : 2.0 * static_cast<double>(r.tp) / static_cast<double>(denom);
    if (first || r.f1 > best.f1) best = r;
    first = false;
  }
  return best;
}

double adjusted_rand_index(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  const std::size_t n = a.size();
  auto c2 = [](double x) { return x * (x - 1.0) / 2.0; };
  std::map<std::pair<std::size_t, std::size_t>, double> joint;
  std::map<std::size_t, double> ra, rb;
  for (std::size_t i = 0; i < n; ++i) {
    joint[{a[i], b[i]}] += 1;
    ra[a[i]] += 1;
    rb[b[i]] += 1;
  }
  double index = 0, sa = 0, sb = 0;
  for (const auto& [k, v] : joint) index += c2(v);
  for (const auto& [k, v] : ra) sa += c2(v);
  for (const auto& [k, v] : rb) sb += c2(v);
  const double expected = sa * sb / c2(static_cast<double>(n));
  const double max_index = (sa + sb) / 2.0;
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace reclink::oracle
