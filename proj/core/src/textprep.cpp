#include "reclink/textprep.hpp"

#include <algorithm>
#include <numeric>

#include "reclink/error.hpp"

namespace reclink {

SerializedRecord serialize_record(const Table& table, std::size_t row,
                                  const ColumnSelector& on,
                                  const SeparatorSpec& sep) {
  if (sep.token.empty()) throw UserError("separator token must be non-empty");
  const auto cols = on.resolve(table);
  SerializedRecord rec{table.row_id(row), {}};
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) rec.text += sep.token;
    rec.text += table.cell(row, cols[i]);
  }
  return rec;
}

std::vector<SerializedRecord> serialize_table(const Table& table,
                                              const ColumnSelector& on,
                                              const SeparatorSpec& sep) {
  if (sep.token.empty()) throw UserError("separator token must be non-empty");
  const auto cols = on.resolve(table);
  std::vector<SerializedRecord> out;
  out.reserve(table.num_rows());
  for (std::size_t r = 0; r < table.num_rows(); ++r) {
    SerializedRecord rec{table.row_id(r), {}};
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (i) rec.text += sep.token;
      rec.text += table.cell(r, cols[i]);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::u32string decode_utf8(std::string_view text) {
  constexpr char32_t kReplacement = 0xFFFD;
  std::u32string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto b0 = static_cast<unsigned char>(text[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    char32_t min = 0;
    if (b0 < 0x80) {
      out.push_back(b0);
      ++i;
      continue;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2, cp = b0 & 0x1F, min = 0x80;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3, cp = b0 & 0x0F, min = 0x800;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4, cp = b0 & 0x07, min = 0x10000;
    } else {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    bool ok = i + len <= text.size();
    for (std::size_t k = 1; ok && k < len; ++k) {
      const auto b = static_cast<unsigned char>(text[i + k]);
      if ((b & 0xC0) != 0x80) ok = false;
      else cp = (cp << 6) | (b & 0x3F);
    }
    if (!ok || cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string encode_utf8(std::u32string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char32_t c : text) {
    if (c < 0x80) {
      out.push_back(static_cast<char>(c));
    } else if (c < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (c >> 6)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else if (c < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (c >> 12)));
      out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (c >> 18)));
      out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    }
  }
  return out;
}

std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  // Two-row DP over the shorter string.
  if (a.size() < b.size()) std::swap(a, b);
  if (b.empty()) return a.size();
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      row[j] = std::min({up + 1, row[j - 1] + 1, diag + cost});
      diag = up;
    }
  }
  return row[b.size()];
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  return levenshtein(decode_utf8(a), decode_utf8(b));
}

namespace {

double similarity_from(std::u32string_view a, std::u32string_view b) {
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

}  // namespace

double edit_similarity(std::string_view a, std::string_view b) {
  return similarity_from(decode_utf8(a), decode_utf8(b));
}

LinkResult edit_distance_link(std::span<const SerializedRecord> queries,
                              std::span<const SerializedRecord> keys,
                              std::size_t k) {
  if (k == 0) throw UserError("k must be >= 1");
  if (keys.empty()) throw UserError("edit-distance linkage needs at least one key");

  std::vector<std::u32string> key_text;
  key_text.reserve(keys.size());
  for (const auto& key : keys) key_text.push_back(decode_utf8(key.text));

  LinkResult result;
  std::vector<std::pair<double, RowId>> scored(keys.size());
  const std::size_t take = std::min(k, keys.size());
  for (const auto& q : queries) {
    const auto qt = decode_utf8(q.text);
    for (std::size_t i = 0; i < keys.size(); ++i) {
      scored[i] = {similarity_from(qt, key_text[i]), keys[i].row_id};
    }
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                      scored.end(), [](const auto& x, const auto& y) {
                        return x.first != y.first ? x.first > y.first : x.second < y.second;
                      });
    for (std::size_t r = 0; r < take; ++r) {
      result.matches.push_back({q.row_id, scored[r].second, scored[r].first,
                                static_cast<int>(r + 1)});
    }
  }
  return result;
}

}  // namespace reclink
