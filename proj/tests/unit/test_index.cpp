#include <doctest.h>

#include <random>
#include <set>

#include "helpers.hpp"
#include "oracles.hpp"
#include "reclink/error.hpp"
#include "reclink/index.hpp"

using namespace reclink;

namespace {

void check_against_oracle(const EmbeddingMatrix& keys, const EmbeddingMatrix& queries,
                          const Neighbors& got, std::size_t k) {
  const auto want = oracle::brute_force_knn(keys, queries, k);
  REQUIRE(got.size() == want.size());
  for (std::size_t q = 0; q < got.size(); ++q) {
    REQUIRE(got[q].size() == want[q].size());
    std::set<RowId> a, b;
    for (std::size_t r = 0; r < got[q].size(); ++r) {
      a.insert(got[q][r].key);
      b.insert(want[q][r].key);
      CHECK(std::abs(got[q][r].score - want[q][r].score) <= 1e-9);
      CHECK(got[q][r].rank == static_cast<int>(r + 1));
    }
    CHECK(a == b);
  }
}

}  // namespace

TEST_SUITE("index") {
  TEST_CASE("build counts valid keys only") {
    EmbeddingMatrix keys(4, 3);
    keys.set_row(0, 0, std::vector<double>{1, 0, 0});
    keys.set_row(1, 1, std::vector<double>{0, 1, 0});
    keys.set_invalid(2, 2);
    keys.set_row(3, 3, std::vector<double>{0, 0, 1});
    const auto index = VectorIndex::build(keys);
    CHECK(index.size() == 3);
    CHECK(index.dim() == 3);
    EmbeddingMatrix none(2, 3);
    none.set_invalid(0, 0);
    none.set_invalid(1, 1);
    CHECK_THROWS_AS(VectorIndex::build(none), UserError);
  }

  TEST_CASE("self-similarity, truncation and dimension checks") {
    std::mt19937_64 rng(1);
    const auto keys = testing::random_embeddings(rng, 3, 8);
    const auto index = VectorIndex::build(keys);
    EmbeddingMatrix q(1, 8);
    std::vector<double> v(keys.vector(1).begin(), keys.vector(1).end());
    q.set_row(0, 0, v);
    const auto res = index.search(q, 5);
    REQUIRE(res[0].size() == 3);
    CHECK(res[0][0].key == 1);
    CHECK(std::abs(res[0][0].score - 1.0) <= 1e-6);
    CHECK_THROWS_AS(index.search(q, 0), UserError);
    EmbeddingMatrix wrong(1, 4);
    wrong.set_row(0, 0, std::vector<double>{1, 0, 0, 0});
    CHECK_THROWS_AS(index.search(wrong, 1), UserError);
  }

  TEST_CASE("invalid queries get empty lists") {
    std::mt19937_64 rng(2);
    const auto keys = testing::random_embeddings(rng, 5, 4);
    EmbeddingMatrix q(2, 4);
    q.set_invalid(0, 0);
    q.set_row(1, 1, std::vector<double>{1, 2, 3, 4});
    const auto res = VectorIndex::build(keys).search(q, 2);
    CHECK(res[0].empty());
    CHECK(res[1].size() == 2);
  }

  TEST_CASE("exact against brute force on 200 x 1000, d=32, k=10") {
    std::mt19937_64 rng(3);
    const auto keys = testing::random_embeddings(rng, 1000, 32);
    const auto queries = testing::random_embeddings(rng, 200, 32);
    const auto index = VectorIndex::build(keys);
    check_against_oracle(keys, queries, index.search(queries, 10), 10);
  }

  TEST_CASE("thread count does not change results and rebuilds are identical") {
    std::mt19937_64 rng(4);
    const auto keys = testing::random_embeddings(rng, 700, 16);
    const auto queries = testing::random_embeddings(rng, 90, 16);
    const auto a = VectorIndex::build(keys).search(queries, 7, {1});
    const auto b = VectorIndex::build(keys).search(queries, 7, {4});
    CHECK(a == b);
  }

  TEST_CASE("duplicated keys take consecutive ranks with equal scores, lower id first") {
    std::mt19937_64 rng(5);
    auto base = testing::random_embeddings(rng, 50, 8);
    EmbeddingMatrix keys(51, 8);
    for (std::size_t i = 0; i < 50; ++i) {
      keys.set_row(i, static_cast<RowId>(i),
                   std::vector<double>(base.vector(i).begin(), base.vector(i).end()));
    }
    keys.set_row(50, 50, std::vector<double>(base.vector(17).begin(), base.vector(17).end()));
    EmbeddingMatrix q(1, 8);
    q.set_row(0, 0, std::vector<double>(base.vector(17).begin(), base.vector(17).end()));
    const auto res = VectorIndex::build(keys).search(q, 3);
    CHECK(res[0][0].key == 17);
    CHECK(res[0][1].key == 50);
    CHECK(res[0][0].score == res[0][1].score);
  }

  TEST_CASE("top-k is a prefix of top-(k+1)") {
    std::mt19937_64 rng(6);
    const auto keys = testing::random_embeddings(rng, 300, 8);
    const auto queries = testing::random_embeddings(rng, 30, 8);
    const auto index = VectorIndex::build(keys);
    for (std::size_t k = 1; k < 12; ++k) {
      const auto a = index.search(queries, k);
      const auto b = index.search(queries, k + 1);
      for (std::size_t q = 0; q < a.size(); ++q) {
        CHECK(std::equal(a[q].begin(), a[q].end(), b[q].begin()));
      }
    }
  }

  TEST_CASE("blocked search never crosses blocks") {
    std::mt19937_64 rng(7);
    const auto keys = testing::random_embeddings(rng, 40, 8);
    const auto queries = testing::random_embeddings(rng, 20, 8);
    std::vector<std::string> kb, qb;
    for (std::size_t i = 0; i < 40; ++i) kb.push_back(i % 2 ? "A" : "B");
    for (std::size_t i = 0; i < 20; ++i) qb.push_back(i % 3 == 0 ? "C" : (i % 2 ? "A" : "B"));
    const auto index = VectorIndex::build(keys, kb);
    CHECK(index.blocked());
    const auto res = index.blocked_search(queries, qb, 5);
    for (std::size_t q = 0; q < 20; ++q) {
      if (qb[q] == "C") {
        CHECK(res[q].empty());
        continue;
      }
      CHECK(res[q].size() == 5);
      for (const auto& n : res[q]) CHECK(kb[static_cast<std::size_t>(n.key)] == qb[q]);
    }
  }

  TEST_CASE("blocked search equals brute force inside each block") {
    std::mt19937_64 rng(8);
    const auto keys = testing::random_embeddings(rng, 60, 8);
    const auto queries = testing::random_embeddings(rng, 10, 8);
    std::vector<std::string> kb(60, "x");
    std::vector<std::string> qb(10, "x");
    const auto blocked = VectorIndex::build(keys, kb).blocked_search(queries, qb, 4);
    CHECK(blocked == VectorIndex::build(keys).search(queries, 4));
  }

  TEST_CASE("block keys do not collide") {
    const std::vector<std::string> a{"a", "bc"}, b{"ab", "c"};
    CHECK(make_block_key(a) != make_block_key(b));
  }
}
