#include <doctest.h>

#include <algorithm>
#include <random>

#include "helpers.hpp"
#include "reclink/audit.hpp"
#include "reclink/error.hpp"

using namespace reclink;

TEST_SUITE("audit") {
  TEST_CASE("link audit round-trips") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 30; ++trial) {
      LinkResult r;
      for (RowId q = 0; q < 20; ++q) {
        if (rng() % 4 == 0) {
          r.unmatched.push_back({q, static_cast<UnmatchedReason>(rng() % 4)});
          continue;
        }
        const int k = 1 + static_cast<int>(rng() % 3);
        for (int rank = 1; rank <= k; ++rank) {
          r.matches.push_back({q, static_cast<RowId>(rng() % 50), u(rng), rank});
        }
      }
      CHECK(parse_link_audit(format_link_audit(r)) == r);
    }
  }

  TEST_CASE("reason names round-trip") {
    for (int i = 0; i < 4; ++i) {
      const auto reason = static_cast<UnmatchedReason>(i);
      CHECK(parse_unmatched_reason(to_string(reason)) == reason);
    }
    CHECK_FALSE(parse_unmatched_reason("nope").has_value());
  }

  TEST_CASE("one json object per line") {
    LinkResult r;
    r.matches.push_back({0, 3, 0.91, 1});
    r.unmatched.push_back({1, UnmatchedReason::kBelowThreshold});
    const auto text = format_link_audit(r);
    CHECK(text.find("\"type\":\"match\"") != std::string::npos);
    CHECK(text.find("below_threshold") != std::string::npos);
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);
  }

  TEST_CASE("cluster audit lists every row") {
    ClusterAssignment a;
    a.row_ids = {0, 1, 2, 3};
    a.labels = {0, 1, 0, 1};
    a.representatives = {0, 1};
    const auto text = format_cluster_audit(a);
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);
    CHECK(text.find("\"representative\":1") != std::string::npos);
  }

  TEST_CASE("malformed audits are user errors") {
    CHECK_THROWS_AS(parse_link_audit("{\"type\":\"match\"}\n"), UserError);
    CHECK_THROWS_AS(parse_link_audit("not json\n"), UserError);
    CHECK_THROWS_AS(load_link_audit("/nonexistent/audit.jsonl"), UserError);
  }

  TEST_CASE("text files round-trip") {
    testing::TempDir dir;
    write_text_file(dir / "a.txt", "x\ny\n");
    CHECK(read_text_file(dir / "a.txt") == "x\ny\n");
  }
}
