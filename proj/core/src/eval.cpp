#include "reclink/eval.hpp"

#include <charconv>
#include <map>
#include <nlohmann/json.hpp>
#include <set>

#include "reclink/error.hpp"

namespace reclink {

namespace {

std::string num(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace

std::string EvalReport::to_key_value() const {
  std::string s = "metric=" + metric + " value=" + num(value) +
                  " support=" + std::to_string(support);
  if (metric == "top1_accuracy") {
    s += " correct=" + std::to_string(correct);
  } else {
    s += " precision=" + num(precision) + " recall=" + num(recall) +
         " tp=" + std::to_string(true_positives) + " fp=" + std::to_string(false_positives) +
         " fn=" + std::to_string(false_negatives);
  }
  if (threshold) s += " threshold=" + num(*threshold);
  return s;
}

std::string EvalReport::to_json_line() const {
  nlohmann::ordered_json j{{"metric", metric}, {"value", value}, {"support", support}};
  if (metric == "top1_accuracy") {
    j["correct"] = correct;
  } else {
    j["precision"] = precision;
    j["recall"] = recall;
    j["tp"] = true_positives;
    j["fp"] = false_positives;
    j["fn"] = false_negatives;
  }
  if (threshold) j["threshold"] = *threshold;
  return j.dump() + "\n";
}

EvalReport top1_accuracy(const LinkResult& result, const GoldLinks& gold) {
  std::map<RowId, RowId> rank1;
  std::set<RowId> seen;
  for (const auto& m : result.matches) {
    seen.insert(m.query);
    if (m.rank == 1) rank1.emplace(m.query, m.key);
  }
  for (const auto& u : result.unmatched) seen.insert(u.query);

  std::map<RowId, std::set<RowId>> golds;
  for (const auto& g : gold) golds[g.query].insert(g.key);

  EvalReport report;
  report.metric = "top1_accuracy";
  for (const auto& [query, keys] : golds) {
    if (!seen.contains(query)) {
      throw UserError("gold query " + std::to_string(query) + " is missing from the link result");
    }
    ++report.support;
    auto it = rank1.find(query);
    if (it != rank1.end() && keys.contains(it->second)) ++report.correct;
  }
  report.value = report.support == 0 ? 0.0
                                     : static_cast<double>(report.correct) /
                                           static_cast<double>(report.support);
  return report;
}

EvalReport pairwise_f1(std::span<const double> scores, std::span<const int> labels,
                       double threshold) {
  if (scores.size() != labels.size()) throw UserError("scores and labels differ in length");
  EvalReport r;
  r.metric = "pairwise_f1";
  r.threshold = threshold;
  r.support = scores.size();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw UserError("labels must be 0 or 1");
    const bool predicted = scores[i] >= threshold;
    if (predicted && labels[i]) ++r.true_positives;
    else if (predicted) ++r.false_positives;
    else if (labels[i]) ++r.false_negatives;
  }
  const auto tp = static_cast<double>(r.true_positives);
  const auto fp = static_cast<double>(r.false_positives);
  const auto fn = static_cast<double>(r.false_negatives);
  r.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  r.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  r.value = r.true_positives == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
  return r;
}

}  // namespace reclink
