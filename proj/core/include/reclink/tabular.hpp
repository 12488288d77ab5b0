#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace reclink {

using RowId = std::int64_t;

enum class TableFormat { kCsv, kJsonl };

// Picks the format from a file extension (.csv / .jsonl / .ndjson).
TableFormat format_from_path(const std::filesystem::path& path);

// An immutable table of string cells. Row ids are the 0-based positions of
// the rows in input order; missing cells are stored as empty strings.
class Table {
 public:
  Table() = default;

  // Throws UserError when column names are empty or duplicated, or when a
  // row does not have exactly one cell per column.
  Table(std::vector<std::string> columns,
        std::vector<std::vector<std::string>> rows);

  const std::vector<std::string>& columns() const { return columns_; }
  std::size_t num_columns() const { return columns_.size(); }
  std::size_t num_rows() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }

  const std::vector<std::string>& row(std::size_t i) const { return rows_[i]; }
  const std::string& cell(std::size_t row, std::size_t col) const {
    return rows_[row][col];
  }
  RowId row_id(std::size_t i) const { return static_cast<RowId>(i); }

  // Index of `name`, or -1.
  std::ptrdiff_t find_column(std::string_view name) const;
  // Index of `name`; throws UserError naming the column when absent.
  std::size_t column_index(std::string_view name) const;

  friend bool operator==(const Table&, const Table&) = default;

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

// The `on` argument of merge/dedup: an ordered list of column names.
struct ColumnSelector {
  std::vector<std::string> names;

  // Splits "a,b,c" on commas, trimming surrounding whitespace.
  static ColumnSelector parse(std::string_view comma_separated);

  // Column positions in `table`, in selector order. Throws UserError on an
  // empty selector or an unknown column.
  std::vector<std::size_t> resolve(const Table& table) const;

  friend bool operator==(const ColumnSelector&, const ColumnSelector&) = default;
};

Table load_table(const std::filesystem::path& path, TableFormat format);
Table load_table(const std::filesystem::path& path);

void write_table(const Table& table, const std::filesystem::path& path,
                 TableFormat format);
void write_table(const Table& table, const std::filesystem::path& path);

// In-memory variants used by the file functions; `source` names the input in
// error messages.
Table parse_csv(std::string_view text, std::string_view source = "<csv>");
Table parse_jsonl(std::string_view text, std::string_view source = "<jsonl>");
std::string format_csv(const Table& table);
std::string format_jsonl(const Table& table);

}  // namespace reclink
