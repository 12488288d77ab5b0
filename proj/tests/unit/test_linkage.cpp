#include <doctest.h>

#include <random>
#include <set>

#include "helpers.hpp"
#include "oracles.hpp"
#include "reclink/error.hpp"
#include "reclink/index.hpp"
#include "reclink/linkage.hpp"

using namespace reclink;

namespace {

BuiltinProvider small_provider(std::uint64_t seed = 3) {
  EncoderConfig c;
  c.hash_buckets = 4096;
  c.embed_dim = 64;
  c.seed = seed;
  return BuiltinProvider(EncoderModel::initialize(c));
}

Table names(std::initializer_list<const char*> values) {
  std::vector<std::vector<std::string>> rows;
  for (const char* v : values) rows.push_back({v});
  return Table({"name"}, rows);
}

MergeSpec on_name(MergeType type = MergeType::kManyToOne, std::size_t k = 1) {
  MergeSpec s;
  s.merge_type = type;
  s.on = ColumnSelector{{"name"}};
  s.k = k;
  return s;
}

const Table kLeft = names({"Acme Corporation", "Globex Holdings", "Initech Systems",
                           "Umbrella Pharma", "Acme Corp", ""});
const Table kRight = names({"Initech Sys", "ACME CORPORATION", "Globex Hldgs", "Soylent Foods",
                            "Umbrella Pharmaceuticals"});

}  // namespace

TEST_SUITE("linkage") {
  TEST_CASE("merge type parsing") {
    CHECK(parse_merge_type("1:1") == MergeType::kOneToOne);
    CHECK(parse_merge_type("1:m") == MergeType::kOneToMany);
    CHECK(parse_merge_type("m:1") == MergeType::kManyToOne);
    CHECK(parse_merge_type("m:m") == MergeType::kManyToMany);
    CHECK(to_string(MergeType::kManyToMany) == "m:m");
    CHECK_THROWS_AS(parse_merge_type("n:1"), UserError);
  }

  TEST_CASE("spec validation") {
    auto s = on_name(MergeType::kOneToOne, 3);
    CHECK_THROWS_AS(s.validate(), UserError);
    s = on_name();
    s.left_on = ColumnSelector{{"name"}};
    CHECK_THROWS_AS(s.validate(), UserError);
    MergeSpec split;
    split.left_on = ColumnSelector{{"a", "b"}};
    split.right_on = ColumnSelector{{"c"}};
    CHECK_THROWS_AS(split.validate(), UserError);
    CHECK_THROWS_AS(MergeSpec{}.validate(), UserError);
  }

  TEST_CASE("identity merge of one row") {
    auto p = small_provider();
    const auto t = names({"Acme Corporation"});
    const auto out = merge(t, t, on_name(), p);
    REQUIRE(out.links.matches.size() == 1);
    CHECK(std::abs(out.links.matches[0].score - 1.0) <= 1e-6);
    CHECK(out.table.columns() == std::vector<std::string>{"name", "right_name", "score"});
    CHECK(out.table.cell(0, 1) == "Acme Corporation");
  }

  TEST_CASE("a threshold above any cosine leaves every query unmatched") {
    auto p = small_provider();
    auto s = on_name();
    s.threshold = 1.1;
    const auto out = merge(kLeft, kRight, s, p);
    CHECK(out.links.matches.empty());
    REQUIRE(out.links.unmatched.size() == kLeft.num_rows());
    for (std::size_t i = 0; i + 1 < kLeft.num_rows(); ++i) {
      CHECK(out.links.unmatched[i].reason == UnmatchedReason::kBelowThreshold);
    }
    CHECK(out.links.unmatched.back().reason == UnmatchedReason::kInvalidEmbedding);
    CHECK(out.table.num_rows() == kLeft.num_rows());
    CHECK(out.table.cell(0, 2) == "");
  }

  TEST_CASE("m:1 links every valid left row to its best right row") {
    auto p = small_provider();
    const auto out = merge(kLeft, kRight, on_name(), p);
    std::vector<RowId> keys;
    for (const auto& m : out.links.matches) keys.push_back(m.key);
    CHECK(keys == std::vector<RowId>{1, 2, 0, 4, 1});
    REQUIRE(out.links.unmatched.size() == 1);
    CHECK(out.links.unmatched[0].query == 5);
    CHECK(out.table.num_rows() == 6);
  }

  TEST_CASE("raising the threshold only removes matches") {
    auto p = small_provider();
    std::set<std::pair<RowId, RowId>> previous;
    bool first = true;
    for (double t : {0.9, 0.7, 0.5, 0.3, 0.0, -1.0}) {
      auto s = on_name();
      s.threshold = t;
      const auto out = merge(kLeft, kRight, s, p);
      std::set<std::pair<RowId, RowId>> now;
      for (const auto& m : out.links.matches) {
        CHECK(m.score >= t);
        now.insert({m.query, m.key});
      }
      if (!first) CHECK(std::includes(now.begin(), now.end(), previous.begin(), previous.end()));
      previous = now;
      first = false;
    }
  }

  TEST_CASE("1:1 uses every query and key at most once") {
    auto p = small_provider();
    const auto left = names({"Acme Corp", "Acme Corporation", "ACME Corp.", "Globex", "Initech"});
    const auto right = names({"Acme Corporation", "Globex Inc", "Initech LLC"});
    const auto out = merge(left, right, on_name(MergeType::kOneToOne), p);
    std::set<RowId> q, k;
    for (const auto& m : out.links.matches) {
      CHECK(q.insert(m.query).second);
      CHECK(k.insert(m.key).second);
    }
    CHECK(out.links.matches.size() == 3);
    CHECK(out.links.unmatched.size() == 2);
    for (const auto& u : out.links.unmatched) {
      CHECK(u.reason == UnmatchedReason::kAssignmentConflict);
    }
  }

  TEST_CASE("m:m returns k ranked rows per query") {
    auto p = small_provider();
    const auto out = merge(kLeft, kRight, on_name(MergeType::kManyToMany, 3), p);
    CHECK(out.links.matches.size() == 15);
    CHECK(out.table.num_rows() == 16);
    for (std::size_t i = 0; i < 15; ++i) {
      CHECK(out.links.matches[i].rank == static_cast<int>(i % 3 + 1));
    }
  }

  TEST_CASE("1:m queries with the right rows and keeps left columns first") {
    auto p = small_provider();
    const Table left({"id", "name"}, {{"L1", "Acme Corporation"}, {"L2", "Globex Holdings"}});
    const Table right({"name"}, {{"Acme Corp"}, {"ACME Corporation"}, {"Globex Hldgs"}});
    const auto out = merge(left, right, on_name(MergeType::kOneToMany), p);
    CHECK(out.table.columns() == std::vector<std::string>{"id", "name", "right_name", "score"});
    REQUIRE(out.table.num_rows() == 3);
    CHECK(out.table.cell(0, 0) == "L1");
    CHECK(out.table.cell(0, 2) == "Acme Corp");
    CHECK(out.table.cell(2, 0) == "L2");
  }

  TEST_CASE("blocking restricts candidates and reports empty blocks") {
    auto p = small_provider();
    const Table left({"name", "country"},
                     {{"Acme Corporation", "JP"}, {"Acme Corporation", "US"}, {"Acme", "FR"}});
    const Table right({"name", "country"},
                      {{"Acme Corporation", "US"}, {"Zenith Ltd", "JP"}});
    auto s = on_name();
    s.blocking = ColumnSelector{{"country"}};
    const auto out = merge(left, right, s, p);
    REQUIRE(out.links.matches.size() == 2);
    CHECK(out.links.matches[0].key == 1);
    CHECK(out.links.matches[1].key == 0);
    REQUIRE(out.links.unmatched.size() == 1);
    CHECK(out.links.unmatched[0].reason == UnmatchedReason::kEmptyBlock);
  }

  TEST_CASE("column name collisions get a numeric suffix") {
    auto p = small_provider();
    const Table left({"name", "right_name", "score"}, {{"Acme", "x", "y"}});
    const Table right({"name"}, {{"Acme"}});
    const auto out = merge(left, right, on_name(), p);
    CHECK(out.table.columns() ==
          std::vector<std::string>{"name", "right_name", "score", "right_name_2", "score_2"});
  }

  TEST_CASE("merge errors") {
    auto p = small_provider();
    CHECK_THROWS_AS(merge(kLeft, Table({"name"}, {}), on_name(), p), UserError);
    auto s = on_name();
    s.on = ColumnSelector{{"missing"}};
    CHECK_THROWS_AS(merge(kLeft, kRight, s, p), UserError);
  }

  TEST_CASE("tune_threshold examples") {
    const std::vector<double> s1{0.9, 0.8, 0.2, 0.1};
    const std::vector<int> l1{1, 1, 0, 0};
    auto c = tune_threshold(s1, l1);
    CHECK(c.threshold == doctest::Approx(0.5));
    CHECK(c.f1 == 1.0);

    const std::vector<double> s2{0.3, 0.7};
    const std::vector<int> l2{1, 1};
    c = tune_threshold(s2, l2);
    CHECK(c.threshold < 0.3);
    CHECK(c.f1 == 1.0);
    CHECK(c.threshold == doctest::Approx(0.3 - kThresholdEpsilon));

    const std::vector<int> none{0, 0};
    CHECK_THROWS_AS(tune_threshold(s2, none), UserError);
  }

  TEST_CASE("tune_threshold equals the exhaustive sweep") {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> grid(0, 20), len(1, 60);
    std::bernoulli_distribution coin(0.4);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> scores;
      std::vector<int> labels;
      const int n = len(rng);
      for (int i = 0; i < n; ++i) {
        scores.push_back(grid(rng) / 20.0);
        labels.push_back(coin(rng) ? 1 : 0);
      }
      if (std::count(labels.begin(), labels.end(), 1) == 0) labels[0] = 1;
      const auto got = tune_threshold(scores, labels);
      const auto want = oracle::exhaustive_threshold_sweep(scores, labels);
      CHECK(got.f1 == want.f1);
    }
  }

  TEST_CASE("dedup keeps the first row of each cluster") {
    auto p = small_provider();
    const Table t({"id", "name"}, {{"1", "Acme Corporation"},
                                   {"2", "Globex"},
                                   {"3", "Acme Corporation"},
                                   {"4", "Initech"}});
    ClusterParams params;
    const auto out = dedup(t, ColumnSelector{{"name"}}, p, params);
    CHECK(out.table.num_rows() == 3);
    CHECK(out.table.cell(2, 0) == "4");
    CHECK(out.assignment.labels == std::vector<std::size_t>{0, 1, 0, 2});
  }

  TEST_CASE("dedup with threshold 0 keeps distinct rows") {
    auto p = small_provider();
    ClusterParams params;
    params.threshold = 0.0;
    const auto out = dedup(kRight, ColumnSelector{{"name"}}, p, params);
    CHECK(out.table == kRight);
  }

  TEST_CASE("dedup is idempotent under single linkage") {
    auto p = small_provider();
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<std::vector<std::string>> rows;
      for (int i = 0; i < 60; ++i) rows.push_back({testing::random_word(rng, 10, "abcdef ")});
      const Table t({"name"}, rows);
      for (auto alg : {ClusterAlgorithm::kSlink, ClusterAlgorithm::kAgglomerative}) {
        ClusterParams params;
        params.algorithm = alg;
        params.threshold = 0.2 + 0.05 * trial;
        const auto once = dedup(t, ColumnSelector{{"name"}}, p, params).table;
        const auto twice = dedup(once, ColumnSelector{{"name"}}, p, params).table;
        CHECK(twice == once);
      }
    }
  }

  TEST_CASE("aggregate maps a copy onto itself and everything onto a single row") {
    auto p = small_provider();
    const auto sel = ColumnSelector{{"name"}};
    auto out = aggregate_rows(kRight, kRight, sel, sel, p, 1);
    for (const auto& m : out.links.matches) CHECK(m.query == m.key);
    out = aggregate_rows(kRight, names({"Anything"}), sel, sel, p, 1);
    CHECK(out.links.matches.size() == kRight.num_rows());
    for (const auto& m : out.links.matches) CHECK(m.key == 0);
  }

  TEST_CASE("aggregate equals the cosine argmax over the full score matrix") {
    auto p = small_provider(21);
    std::mt19937_64 rng(10);
    std::vector<std::vector<std::string>> fine_rows, coarse_rows;
    for (int i = 0; i < 20; ++i) fine_rows.push_back({testing::random_word(rng, 12, "abcdefg")});
    for (int i = 0; i < 4; ++i) coarse_rows.push_back({testing::random_word(rng, 12, "abcdefg") + "x"});
    const Table fine({"name"}, fine_rows), coarse({"name"}, coarse_rows);
    const auto sel = ColumnSelector{{"name"}};
    const auto out = aggregate_rows(fine, coarse, sel, sel, p, 1);
    const auto fe = p.embed(serialize_table(fine, sel));
    const auto ce = p.embed(serialize_table(coarse, sel));
    std::size_t m = 0;
    for (std::size_t i = 0; i < 20; ++i) {
      if (!fe.valid(i)) continue;
      double best = -2;
      RowId arg = -1;
      for (std::size_t j = 0; j < 4; ++j) {
        if (!ce.valid(j)) continue;
        double s = 0;
        for (std::size_t c = 0; c < fe.dim(); ++c) {
          s += static_cast<double>(fe.vector(i)[c]) * ce.vector(j)[c];
        }
        if (s > best + 1e-12) {
          best = s;
          arg = static_cast<RowId>(j);
        }
      }
      REQUIRE(m < out.links.matches.size());
      CHECK(out.links.matches[m].key == arg);
      ++m;
    }
  }
}
