#include "reclink/linkage.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "reclink/error.hpp"

namespace reclink {

namespace {

std::string format_score(double score) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, score);
  return std::string(buf, end);
}

std::string unique_name(std::string name, std::set<std::string>& taken) {
  if (taken.insert(name).second) return name;
  for (int i = 2;; ++i) {
    auto candidate = name + "_" + std::to_string(i);
    if (taken.insert(candidate).second) return candidate;
  }
}

std::vector<std::string> block_keys_for(const Table& table, const ColumnSelector& blocking) {
  const auto cols = blocking.resolve(table);
  std::vector<std::string> keys;
  keys.reserve(table.num_rows());
  std::vector<std::string> values(cols.size());
  for (std::size_t r = 0; r < table.num_rows(); ++r) {
    for (std::size_t i = 0; i < cols.size(); ++i) values[i] = table.cell(r, cols[i]);
    keys.push_back(make_block_key(values));
  }
  return keys;
}

struct Pair {
  RowId query;
  RowId key;
  double score;
};

}  // namespace

MergeType parse_merge_type(std::string_view text) {
  if (text == "1:1") return MergeType::kOneToOne;
  if (text == "1:m") return MergeType::kOneToMany;
  if (text == "m:1") return MergeType::kManyToOne;
  if (text == "m:m") return MergeType::kManyToMany;
  throw UserError("unknown merge type '" + std::string(text) + "' (expected 1:1, 1:m, m:1 or m:m)");
}

std::string_view to_string(MergeType type) {
  switch (type) {
    case MergeType::kOneToOne: return "1:1";
    case MergeType::kOneToMany: return "1:m";
    case MergeType::kManyToOne: return "m:1";
    case MergeType::kManyToMany: return "m:m";
  }
  return "?";
}

void MergeSpec::validate() const {
  const bool split = left_on.has_value() || right_on.has_value();
  if (on.has_value() == split) {
    throw UserError("give either `on` or both `left_on` and `right_on`");
  }
  if (split && !(left_on && right_on)) {
    throw UserError("`left_on` and `right_on` must be given together");
  }
  if (split && left_on->names.size() != right_on->names.size()) {
    throw UserError("`left_on` and `right_on` must list the same number of columns");
  }
  if (k < 1) throw UserError("k must be >= 1");
  if (merge_type == MergeType::kOneToOne && k != 1) {
    throw UserError("1:1 merges require k = 1");
  }
  if (threshold && !std::isfinite(*threshold)) throw UserError("threshold must be finite");
  if (separator.token.empty()) throw UserError("separator token must be non-empty");
}

const ColumnSelector& MergeSpec::left_selector() const { return on ? *on : *left_on; }
const ColumnSelector& MergeSpec::right_selector() const { return on ? *on : *right_on; }

MergeOutput merge(const Table& left, const Table& right, const MergeSpec& spec,
                  EmbeddingProvider& provider) {
  spec.validate();
  const bool swapped = spec.merge_type == MergeType::kOneToMany;
  const Table& query_table = swapped ? right : left;
  const Table& key_table = swapped ? left : right;
  const ColumnSelector& query_on = swapped ? spec.right_selector() : spec.left_selector();
  const ColumnSelector& key_on = swapped ? spec.left_selector() : spec.right_selector();

  if (key_table.empty()) throw UserError("the key side of the merge has no rows");
  // Validate all selectors before doing any embedding work.
  query_on.resolve(query_table);
  key_on.resolve(key_table);
  std::vector<std::string> query_blocks, key_blocks;
  if (spec.blocking) {
    query_blocks = block_keys_for(query_table, *spec.blocking);
    key_blocks = block_keys_for(key_table, *spec.blocking);
  }

  const auto key_texts = serialize_table(key_table, key_on, spec.separator);
  const auto query_texts = serialize_table(query_table, query_on, spec.separator);
  const auto key_emb = provider.embed(key_texts);
  const auto query_emb = provider.embed(query_texts);
  if (query_emb.size() > 0 && key_emb.size() > 0 && query_emb.dim() != key_emb.dim()) {
    throw ProviderError("provider returned different dimensions for queries and keys");
  }

  const auto index = spec.blocking ? VectorIndex::build(key_emb, key_blocks)
                                   : VectorIndex::build(key_emb);
  std::size_t retrieve = 1;
  if (spec.merge_type == MergeType::kManyToMany) retrieve = spec.k;
  if (spec.merge_type == MergeType::kOneToOne) retrieve = std::min<std::size_t>(10, index.size());
  const auto neighbours = spec.blocking
                              ? index.blocked_search(query_emb, query_blocks, retrieve, spec.search)
                              : index.search(query_emb, retrieve, spec.search);

  const auto passes = [&](double score) { return !spec.threshold || score >= *spec.threshold; };

  LinkResult links;
  std::vector<std::optional<UnmatchedReason>> reason(query_table.num_rows());
  for (std::size_t q = 0; q < query_table.num_rows(); ++q) {
    if (!query_emb.valid(q)) reason[q] = UnmatchedReason::kInvalidEmbedding;
    else if (neighbours[q].empty()) reason[q] = UnmatchedReason::kEmptyBlock;
    else if (!passes(neighbours[q].front().score)) reason[q] = UnmatchedReason::kBelowThreshold;
  }

  if (spec.merge_type == MergeType::kOneToOne) {
    std::vector<Pair> pairs;
    for (std::size_t q = 0; q < neighbours.size(); ++q) {
      if (reason[q]) continue;
      for (const auto& nb : neighbours[q]) {
        if (passes(nb.score)) pairs.push_back({query_table.row_id(q), nb.key, nb.score});
      }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.query != b.query) return a.query < b.query;
      return a.key < b.key;
    });
    std::set<RowId> used_queries, used_keys;
    for (const auto& p : pairs) {
      if (used_queries.contains(p.query) || used_keys.contains(p.key)) continue;
      used_queries.insert(p.query);
      used_keys.insert(p.key);
      links.matches.push_back({p.query, p.key, p.score, 1});
    }
    std::sort(links.matches.begin(), links.matches.end(),
              [](const Match& a, const Match& b) { return a.query < b.query; });
    for (std::size_t q = 0; q < query_table.num_rows(); ++q) {
      if (!reason[q] && !used_queries.contains(query_table.row_id(q))) {
        reason[q] = UnmatchedReason::kAssignmentConflict;
      }
    }
  } else {
    for (std::size_t q = 0; q < neighbours.size(); ++q) {
      if (reason[q]) continue;
      for (const auto& nb : neighbours[q]) {
        if (!passes(nb.score)) break;
        links.matches.push_back({query_table.row_id(q), nb.key, nb.score, nb.rank});
      }
    }
  }
  for (std::size_t q = 0; q < query_table.num_rows(); ++q) {
    if (reason[q]) links.unmatched.push_back({query_table.row_id(q), *reason[q]});
  }

  // Assemble the joined table: left columns, prefixed right columns, score.
  std::set<std::string> taken(left.columns().begin(), left.columns().end());
  std::vector<std::string> columns = left.columns();
  for (const auto& c : right.columns()) {
    columns.push_back(unique_name(std::string(kRightPrefix) + c, taken));
  }
  columns.push_back(unique_name(std::string(kScoreColumn), taken));

  std::vector<std::vector<std::string>> rows;
  const auto emit = [&](std::optional<RowId> left_row, std::optional<RowId> right_row,
                        std::optional<double> score) {
    std::vector<std::string> row;
    row.reserve(columns.size());
    if (left_row) {
      const auto& cells = left.row(static_cast<std::size_t>(*left_row));
      row.insert(row.end(), cells.begin(), cells.end());
    } else {
      row.resize(left.num_columns());
    }
    if (right_row) {
      const auto& cells = right.row(static_cast<std::size_t>(*right_row));
      row.insert(row.end(), cells.begin(), cells.end());
    } else {
      row.resize(row.size() + right.num_columns());
    }
    row.push_back(score ? format_score(*score) : std::string());
    rows.push_back(std::move(row));
  };

  std::size_t mi = 0;
  for (std::size_t q = 0; q < query_table.num_rows(); ++q) {
    const RowId qid = query_table.row_id(q);
    bool any = false;
    for (; mi < links.matches.size() && links.matches[mi].query == qid; ++mi) {
      const auto& m = links.matches[mi];
      any = true;
      if (swapped) emit(m.key, m.query, m.score);
      else emit(m.query, m.key, m.score);
    }
    if (!any) {
      if (swapped) emit(std::nullopt, qid, std::nullopt);
      else emit(qid, std::nullopt, std::nullopt);
    }
  }
  return {Table(std::move(columns), std::move(rows)), std::move(links)};
}

ThresholdChoice tune_threshold(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw UserError("scores and labels differ in length");
  std::vector<std::pair<double, int>> items;
  items.reserve(scores.size());
  std::size_t positives = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw UserError("non-finite score");
    if (labels[i] != 0 && labels[i] != 1) throw UserError("labels must be 0 or 1");
    items.emplace_back(scores[i], labels[i]);
    positives += static_cast<std::size_t>(labels[i]);
  }
  if (positives == 0) throw UserError("threshold tuning needs at least one positive label");
  std::sort(items.begin(), items.end());

  // Walk distinct scores ascending. Before group g, everything at or above
  // the group's score is predicted a match.
  const auto f1_of = [](std::size_t tp, std::size_t fp, std::size_t fn) {
    return tp == 0 ? 0.0
                   : 2.0 * static_cast<double>(tp) /
                         static_cast<double>(2 * tp + fp + fn);
  };
  const std::size_t total = items.size();
  std::size_t tp = positives, fp = total - positives, fn = 0;

  ThresholdChoice best{items.front().first - kThresholdEpsilon, f1_of(tp, fp, fn)};
  std::size_t i = 0;
  while (i < total) {
    const double value = items[i].first;
    while (i < total && items[i].first == value) {
      if (items[i].second) --tp, ++fn;
      else --fp;
      ++i;
    }
    const double cut = i < total ? value + (items[i].first - value) / 2.0
                                 : value + kThresholdEpsilon;
    const double f1 = f1_of(tp, fp, fn);
    if (f1 > best.f1) best = {cut, f1};
  }
  return best;
}

DedupOutput dedup(const Table& table, const ColumnSelector& on, EmbeddingProvider& provider,
                  const ClusterParams& params, const SeparatorSpec& sep) {
  params.validate();
  const auto texts = serialize_table(table, on, sep);
  if (table.empty()) return {table, {}};
  const auto emb = provider.embed(texts);
  auto assignment = cluster(emb, params);

  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < assignment.row_ids.size(); ++i) {
    if (assignment.representatives[assignment.labels[i]] == assignment.row_ids[i]) {
      rows.push_back(table.row(static_cast<std::size_t>(assignment.row_ids[i])));
    }
  }
  return {Table(table.columns(), std::move(rows)), std::move(assignment)};
}

MergeOutput aggregate_rows(const Table& fine, const Table& coarse,
                           const ColumnSelector& fine_on, const ColumnSelector& coarse_on,
                           EmbeddingProvider& provider, std::size_t k,
                           std::optional<double> threshold) {
  if (fine.empty() || coarse.empty()) throw UserError("aggregate needs two non-empty tables");
  MergeSpec spec;
  spec.merge_type = MergeType::kManyToMany;
  spec.left_on = fine_on;
  spec.right_on = coarse_on;
  spec.k = k;
  spec.threshold = threshold;
  return merge(fine, coarse, spec, provider);
}

}  // namespace reclink
