#include "reclink/index.hpp"

#include <algorithm>
#include <queue>
#include <thread>

#include "reclink/error.hpp"

namespace reclink {

namespace {

constexpr std::size_t kKeyChunk = 512;

struct Candidate {
  double score;
  std::size_t position;  // key position; ids are increasing in position
};

// True when `a` ranks ahead of `b`. Positions follow key row order, so the
// tie-break on position is the tie-break on row id.
inline bool ranks_before(const Candidate& a, const Candidate& b) {
  return a.score != b.score ? a.score > b.score : a.position < b.position;
}

// Bounded top-k; the worst retained candidate sits on top.
class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) { heap_.reserve(k); }

  void offer(const Candidate& c) {
    if (heap_.size() < k_) {
      heap_.push_back(c);
      std::push_heap(heap_.begin(), heap_.end(), ranks_before);
    } else if (ranks_before(c, heap_.front())) {
      std::pop_heap(heap_.begin(), heap_.end(), ranks_before);
      heap_.back() = c;
      std::push_heap(heap_.begin(), heap_.end(), ranks_before);
    }
  }

  std::vector<Candidate> sorted() && {
    std::sort(heap_.begin(), heap_.end(), ranks_before);
    return std::move(heap_);
  }

 private:
  std::size_t k_;
  std::vector<Candidate> heap_;
};

template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::jthread> workers;
  const std::size_t per = (n + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t begin = t * per;
    const std::size_t end = std::min(n, begin + per);
    if (begin >= end) break;
    workers.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
}

}  // namespace

double inner_product(std::span<const float> a, std::span<const float> b) {
  // Four fixed accumulators: vectorizes without reassociating differently
  // from run to run.
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  const std::size_t n = a.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += static_cast<double>(a[i]) * b[i];
    s1 += static_cast<double>(a[i + 1]) * b[i + 1];
    s2 += static_cast<double>(a[i + 2]) * b[i + 2];
    s3 += static_cast<double>(a[i + 3]) * b[i + 3];
  }
  for (; i < n; ++i) s0 += static_cast<double>(a[i]) * b[i];
  return (s0 + s1) + (s2 + s3);
}

std::string make_block_key(std::span<const std::string> values) {
  std::string key;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) key += kBlockKeySeparator;
    key += values[i];
  }
  return key;
}

VectorIndex VectorIndex::build(const EmbeddingMatrix& keys) {
  if (keys.dim() < 2) throw UserError("index dimension must be >= 2");
  VectorIndex index;
  index.dim_ = keys.dim();
  const auto valid = keys.num_valid();
  if (valid == 0) throw UserError("cannot build an index with zero valid keys");

  // Keep key order by row id so positional tie-breaks match row-id ties.
  std::vector<std::size_t> order;
  order.reserve(valid);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (keys.valid(i)) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return keys.row_id(a) < keys.row_id(b);
  });

  index.ids_.reserve(valid);
  index.vectors_.reserve(valid * index.dim_);
  for (auto i : order) {
    index.ids_.push_back(keys.row_id(i));
    const auto v = keys.vector(i);
    index.vectors_.insert(index.vectors_.end(), v.begin(), v.end());
  }
  return index;
}

VectorIndex VectorIndex::build(const EmbeddingMatrix& keys,
                               std::span<const std::string> block_keys) {
  if (block_keys.size() != keys.size()) {
    throw UserError("need one block key per key row");
  }
  auto index = build(keys);
  index.blocked_ = true;
  std::map<RowId, std::size_t> row_of_id;
  for (std::size_t i = 0; i < keys.size(); ++i) row_of_id.emplace(keys.row_id(i), i);
  for (std::size_t pos = 0; pos < index.ids_.size(); ++pos) {
    index.blocks_[block_keys[row_of_id.at(index.ids_[pos])]].push_back(pos);
  }
  return index;
}

Neighbors VectorIndex::search(const EmbeddingMatrix& queries, std::size_t k,
                              const SearchOptions& options) const {
  if (k == 0) throw UserError("k must be >= 1");
  if (queries.size() > 0 && queries.dim() != dim_) {
    throw UserError("query dimension " + std::to_string(queries.dim()) +
                    " does not match index dimension " + std::to_string(dim_));
  }
  Neighbors out(queries.size());
  const std::size_t n = ids_.size();
  const std::size_t take = std::min(k, n);

  parallel_for(queries.size(), options.threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> scores(kKeyChunk);
    for (std::size_t q = begin; q < end; ++q) {
      if (!queries.valid(q)) continue;
      const auto qv = queries.vector(q);
      TopK top(take);
      for (std::size_t chunk = 0; chunk < n; chunk += kKeyChunk) {
        const std::size_t len = std::min(kKeyChunk, n - chunk);
        for (std::size_t j = 0; j < len; ++j) {
          scores[j] = inner_product(
              qv, std::span<const float>(vectors_.data() + (chunk + j) * dim_, dim_));
        }
        for (std::size_t j = 0; j < len; ++j) top.offer({scores[j], chunk + j});
      }
      auto ranked = std::move(top).sorted();
      auto& list = out[q];
      list.reserve(ranked.size());
      for (std::size_t r = 0; r < ranked.size(); ++r) {
        list.push_back({ids_[ranked[r].position], ranked[r].score, static_cast<int>(r + 1)});
      }
    }
  });
  return out;
}

Neighbors VectorIndex::blocked_search(const EmbeddingMatrix& queries,
                                      std::span<const std::string> query_blocks,
                                      std::size_t k,
                                      const SearchOptions& options) const {
  if (!blocked_) throw UserError("index was built without blocks");
  if (k == 0) throw UserError("k must be >= 1");
  if (query_blocks.size() != queries.size()) {
    throw UserError("need one block key per query row");
  }
  if (queries.size() > 0 && queries.dim() != dim_) {
    throw UserError("query dimension " + std::to_string(queries.dim()) +
                    " does not match index dimension " + std::to_string(dim_));
  }
  Neighbors out(queries.size());
  parallel_for(queries.size(), options.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t q = begin; q < end; ++q) {
      if (!queries.valid(q)) continue;
      auto it = blocks_.find(query_blocks[q]);
      if (it == blocks_.end()) continue;
      const auto& positions = it->second;
      const auto qv = queries.vector(q);
      TopK top(std::min(k, positions.size()));
      for (auto pos : positions) {
        top.offer({inner_product(qv, std::span<const float>(vectors_.data() + pos * dim_, dim_)),
                   pos});
      }
      auto ranked = std::move(top).sorted();
      auto& list = out[q];
      for (std::size_t r = 0; r < ranked.size(); ++r) {
        list.push_back({ids_[ranked[r].position], ranked[r].score, static_cast<int>(r + 1)});
      }
    }
  });
  return out;
}

}  // namespace reclink
