#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "reclink/encoder.hpp"

namespace reclink {

// Joins block-column values with U+001F so that ("a","bc") != ("ab","c").
std::string make_block_key(std::span<const std::string> values);
inline constexpr std::string_view kBlockKeySeparator = "\x1f";

struct Neighbor {
  RowId key = 0;
  double score = 0.0;  // inner product, accumulated in double
  int rank = 1;        // 1-based

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

// One ranked list per query, in query order.
using Neighbors = std::vector<std::vector<Neighbor>>;

struct SearchOptions {
  // Worker threads for a single search call. Results do not depend on it.
  std::size_t threads = 1;
};

// Dot product of float vectors with float64 accumulation. Every scoring path
// in the library goes through this kernel so equal inputs give equal scores.
double inner_product(std::span<const float> a, std::span<const float> b);

// Exhaustive inner-product index over the valid rows of a key matrix.
class VectorIndex {
 public:
  // Throws UserError when there are no valid keys or dim < 2.
  static VectorIndex build(const EmbeddingMatrix& keys);
  // Blocked index: `block_keys[i]` is the block of key row i.
  static VectorIndex build(const EmbeddingMatrix& keys,
                           std::span<const std::string> block_keys);

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  bool blocked() const { return blocked_; }
  const std::map<std::string, std::vector<std::size_t>, std::less<>>& blocks()
      const {
    return blocks_;
  }
  RowId id_at(std::size_t position) const { return ids_[position]; }

  // Exact top-k per query, ties to lower key row id. Invalid queries get an
  // empty list. Throws UserError on a dimension mismatch or k == 0.
  Neighbors search(const EmbeddingMatrix& queries, std::size_t k,
                   const SearchOptions& options = {}) const;

  // Same, restricted to keys sharing each query's block. Queries whose block
  // has no keys get an empty list.
  Neighbors blocked_search(const EmbeddingMatrix& queries,
                           std::span<const std::string> query_blocks,
                           std::size_t k,
                           const SearchOptions& options = {}) const;

 private:
  std::size_t dim_ = 0;
  bool blocked_ = false;
  std::vector<float> vectors_;  // size() x dim_, contiguous
  std::vector<RowId> ids_;
  std::map<std::string, std::vector<std::size_t>, std::less<>> blocks_;
};

}  // namespace reclink
