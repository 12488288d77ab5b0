#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "reclink/link_result.hpp"
#include "reclink/tabular.hpp"

namespace reclink {

inline constexpr std::string_view kDefaultSeparator = " [SEP] ";

struct SeparatorSpec {
  std::string token{kDefaultSeparator};
};

struct SerializedRecord {
  RowId row_id = 0;
  std::string text;

  friend bool operator==(const SerializedRecord&,
                         const SerializedRecord&) = default;
};

// Joins the selected cells of one row with the separator. Empty cells still
// contribute their separators. Injective over the selected values as long as
// no value contains the separator itself.
SerializedRecord serialize_record(const Table& table, std::size_t row,
                                  const ColumnSelector& on,
                                  const SeparatorSpec& sep = {});

std::vector<SerializedRecord> serialize_table(const Table& table,
                                              const ColumnSelector& on,
                                              const SeparatorSpec& sep = {});

// Decodes UTF-8 into code points. Invalid bytes decode to U+FFFD one byte at a
// time so that every input has a defined result.
std::u32string decode_utf8(std::string_view text);
std::string encode_utf8(std::u32string_view text);

// Edit distance over code points (insert / delete / substitute, unit cost).
std::size_t levenshtein(std::u32string_view a, std::u32string_view b);
std::size_t levenshtein(std::string_view a, std::string_view b);

// 1 - d / max(|a|, |b|) in code points; 1 when both are empty.
double edit_similarity(std::string_view a, std::string_view b);

// Levenshtein baseline matcher: top-k keys per query by edit_similarity,
// ties broken by lower key row id.
LinkResult edit_distance_link(std::span<const SerializedRecord> queries,
                              std::span<const SerializedRecord> keys,
                              std::size_t k);

}  // namespace reclink
