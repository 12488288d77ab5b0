#include <doctest.h>

#include <algorithm>
#include <random>

#include "reclink/error.hpp"
#include "reclink/eval.hpp"

using namespace reclink;

namespace {

LinkResult ranked(std::vector<std::pair<RowId, std::vector<RowId>>> per_query) {
  LinkResult r;
  for (auto& [q, keys] : per_query) {
    int rank = 1;
    for (auto k : keys) r.matches.push_back({q, k, 1.0 - 0.1 * rank, rank++});
    if (keys.empty()) r.unmatched.push_back({q, UnmatchedReason::kBelowThreshold});
  }
  return r;
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("top-1 on hand cases") {
    const GoldLinks gold{{0, 5}, {1, 6}, {2, 7}};
    CHECK(top1_accuracy(ranked({{0, {5}}, {1, {6}}, {2, {7}}}), gold).value == 1.0);
    CHECK(top1_accuracy(ranked({{0, {6}}, {1, {7}}, {2, {5}}}), gold).value == 0.0);
    const auto r = top1_accuracy(ranked({{0, {5, 6}}, {1, {7, 6}}, {2, {7}}}), gold);
    CHECK(r.value == doctest::Approx(2.0 / 3.0));
    CHECK(r.correct == 2);
    CHECK(r.support == 3);
  }

  TEST_CASE("an unmatched query counts as a miss, a missing one is an error") {
    const GoldLinks gold{{0, 5}, {1, 6}};
    CHECK(top1_accuracy(ranked({{0, {5}}, {1, {}}}), gold).value == 0.5);
    CHECK_THROWS_AS(top1_accuracy(ranked({{0, {5}}}), gold), UserError);
  }

  TEST_CASE("several gold keys for one query") {
    const GoldLinks gold{{0, 5}, {0, 9}, {1, 6}};
    const auto r = top1_accuracy(ranked({{0, {9}}, {1, {6}}}), gold);
    CHECK(r.value == 1.0);
    CHECK(r.support == 2);
  }

  TEST_CASE("top-1 ignores gold order") {
    std::mt19937_64 rng(4);
    GoldLinks gold;
    std::vector<std::pair<RowId, std::vector<RowId>>> q;
    for (RowId i = 0; i < 40; ++i) {
      gold.push_back({i, i + 100});
      q.push_back({i, {static_cast<RowId>(i % 3 == 0 ? i + 101 : i + 100)}});
    }
    const double base = top1_accuracy(ranked(q), gold).value;
    for (int t = 0; t < 5; ++t) {
      std::shuffle(gold.begin(), gold.end(), rng);
      CHECK(top1_accuracy(ranked(q), gold).value == base);
    }
  }

  TEST_CASE("pairwise F1 edge cases") {
    const std::vector<double> s{0.9, 0.8, 0.2, 0.1};
    const std::vector<int> y{1, 1, 0, 0};
    auto r = pairwise_f1(s, y, 0.5);
    CHECK(r.value == 1.0);
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 1.0);
    r = pairwise_f1(s, y, 0.95);
    CHECK(r.value == 0.0);
    CHECK(r.false_negatives == 2);
    r = pairwise_f1(s, std::vector<int>{0, 0, 0, 0}, 0.5);
    CHECK(r.value == 0.0);
    CHECK(pairwise_f1(s, y, 0.8).true_positives == 2);
    CHECK_THROWS_AS(pairwise_f1(s, std::vector<int>{1, 0}, 0.5), UserError);
  }

  TEST_CASE("pairwise F1 matches a direct recount and recall falls as the threshold rises") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> s(60);
      std::vector<int> y(60);
      for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = u(rng);
        y[i] = u(rng) < s[i] ? 1 : 0;
      }
      double prev_recall = 2.0;
      for (double t = -1.0; t <= 1.0; t += 0.125) {
        int tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < s.size(); ++i) {
          const bool p = s[i] >= t;
          tp += p && y[i];
          fp += p && !y[i];
          fn += !p && y[i];
        }
        const auto r = pairwise_f1(s, y, t);
        CHECK(r.true_positives == static_cast<std::size_t>(tp));
        CHECK(r.false_positives == static_cast<std::size_t>(fp));
        CHECK(r.false_negatives == static_cast<std::size_t>(fn));
        const double expect = tp == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
        CHECK(r.value == doctest::Approx(expect).epsilon(1e-12));
        CHECK(r.recall <= prev_recall);
        prev_recall = r.recall;
      }
    }
  }

  TEST_CASE("report renderings carry the metric") {
    const auto r = pairwise_f1(std::vector<double>{0.9}, std::vector<int>{1}, 0.5);
    CHECK(r.to_key_value().find("metric=") == 0);
    CHECK(r.to_json_line().find("\"metric\"") != std::string::npos);
    CHECK(r.to_json_line().back() == '\n');
  }
}
