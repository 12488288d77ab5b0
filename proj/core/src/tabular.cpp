#include "reclink/tabular.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <unordered_map>

#include "reclink/audit.hpp"
#include "reclink/error.hpp"

namespace reclink {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::string_view strip_bom(std::string_view text) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  return text;
}

void check_columns(const std::vector<std::string>& columns) {
  std::set<std::string_view> seen;
  for (const auto& c : columns) {
    if (c.empty()) throw UserError("empty column name");
    if (!seen.insert(c).second) throw UserError("duplicate column name '" + c + "'");
  }
}

// RFC 4180 record reader. Fields may be quoted; quoted fields may contain
// commas, doubled quotes and line breaks. Accepts LF and CRLF.
class CsvReader {
 public:
  CsvReader(std::string_view text, std::string_view source)
      : text_(text), source_(source) {}

  // Reads the next record into `out`. Returns false at end of input. A
  // trailing empty line is not a record.
  bool next(std::vector<std::string>& out) {
    out.clear();
    saw_quote_ = false;
    if (pos_ >= text_.size()) return false;
    ++line_;
    record_line_ = line_;
    std::string field;
    bool quoted = false;
    bool after_quote = false;
    while (true) {
      if (pos_ >= text_.size()) {
        if (quoted) fail("unterminated quoted field");
        out.push_back(std::move(field));
        return true;
      }
      char c = text_[pos_++];
      if (quoted) {
        if (c == '"') {
          if (pos_ < text_.size() && text_[pos_] == '"') {
            field.push_back('"');
            ++pos_;
          } else {
            quoted = false;
            after_quote = true;
          }
        } else {
          if (c == '\n') ++line_;
          field.push_back(c);
        }
        continue;
      }
      if (c == ',') {
        out.push_back(std::move(field));
        field.clear();
        after_quote = false;
      } else if (c == '\n' || c == '\r') {
        if (c == '\r' && pos_ < text_.size() && text_[pos_] == '\n') ++pos_;
        out.push_back(std::move(field));
        return true;
      } else if (c == '"' && field.empty() && !after_quote) {
        quoted = true;
        saw_quote_ = true;
      } else if (after_quote) {
        fail("unexpected character after closing quote");
      } else {
        field.push_back(c);
      }
    }
  }

  std::size_t record_line() const { return record_line_; }
  bool at_end() const { return pos_ >= text_.size(); }
  // The last record was an empty unquoted line.
  bool blank() const { return !saw_quote_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw UserError(std::string(source_) + ":" + std::to_string(line_) + ": " + what);
  }

 private:
  std::string_view text_;
  std::string_view source_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
  std::size_t record_line_ = 0;
  bool saw_quote_ = false;
};

bool needs_quoting(std::string_view s) {
  return s.find_first_of(",\"\r\n") != std::string_view::npos ||
         (!s.empty() && (s.front() == ' ' || s.back() == ' '));
}

void append_csv_field(std::string& out, std::string_view s, bool sole_field) {
  // A lone empty field would otherwise produce a blank line.
  if (needs_quoting(s) || (sole_field && s.empty())) {
    out.push_back('"');
    for (char c : s) {
      if (c == '"') out.push_back('"');
      out.push_back(c);
    }
    out.push_back('"');
  } else {
    out.append(s);
  }
}

std::string json_cell(const nlohmann::ordered_json& value, std::string_view source,
                      std::size_t line, const std::string& key) {
  switch (value.type()) {
    case nlohmann::ordered_json::value_t::string:
      return value.get<std::string>();
    case nlohmann::ordered_json::value_t::null:
      return {};
    case nlohmann::ordered_json::value_t::boolean:
    case nlohmann::ordered_json::value_t::number_integer:
    case nlohmann::ordered_json::value_t::number_unsigned:
    case nlohmann::ordered_json::value_t::number_float:
      return value.dump();
    default:
      throw UserError(std::string(source) + ":" + std::to_string(line) +
                      ": field '" + key + "' is not a scalar");
  }
}

}  // namespace

Table::Table(std::vector<std::string> columns,
             std::vector<std::vector<std::string>> rows)
    : columns_(std::move(columns)), rows_(std::move(rows)) {
  check_columns(columns_);
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (rows_[i].size() != columns_.size()) {
      throw UserError("row " + std::to_string(i) + " has " +
                      std::to_string(rows_[i].size()) + " cells, expected " +
                      std::to_string(columns_.size()));
    }
  }
}

std::ptrdiff_t Table::find_column(std::string_view name) const {
  auto it = std::find(columns_.begin(), columns_.end(), name);
  return it == columns_.end() ? -1 : it - columns_.begin();
}

std::size_t Table::column_index(std::string_view name) const {
  auto idx = find_column(name);
  if (idx < 0) throw UserError("unknown column '" + std::string(name) + "'");
  return static_cast<std::size_t>(idx);
}

ColumnSelector ColumnSelector::parse(std::string_view comma_separated) {
  ColumnSelector sel;
  std::size_t start = 0;
  while (start <= comma_separated.size()) {
    auto end = comma_separated.find(',', start);
    if (end == std::string_view::npos) end = comma_separated.size();
    auto name = trim(comma_separated.substr(start, end - start));
    if (name.empty()) throw UserError("empty column name in '" + std::string(comma_separated) + "'");
    sel.names.emplace_back(name);
    start = end + 1;
  }
  return sel;
}

std::vector<std::size_t> ColumnSelector::resolve(const Table& table) const {
  if (names.empty()) throw UserError("empty column selector");
  std::vector<std::size_t> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(table.column_index(n));
  return out;
}

TableFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".csv") return TableFormat::kCsv;
  if (ext == ".jsonl" || ext == ".ndjson") return TableFormat::kJsonl;
  throw UserError("cannot infer table format from '" + path.string() +
                  "' (expected .csv or .jsonl)");
}

Table parse_csv(std::string_view text, std::string_view source) {
  text = strip_bom(text);
  CsvReader reader(text, source);
  std::vector<std::string> header;
  if (!reader.next(header)) throw UserError(std::string(source) + ": missing header row");
  check_columns(header);

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> record;
  while (reader.next(record)) {
    // A blank final line is only a line terminator.
    if (record.size() == 1 && record[0].empty() && reader.blank() && reader.at_end()) break;
    if (record.size() != header.size()) {
      throw UserError(std::string(source) + ":" + std::to_string(reader.record_line()) +
                      ": row " + std::to_string(rows.size() + 1) + " has " +
                      std::to_string(record.size()) + " fields, header has " +
                      std::to_string(header.size()));
    }
    rows.push_back(record);
  }
  return Table(std::move(header), std::move(rows));
}

Table parse_jsonl(std::string_view text, std::string_view source) {
  text = strip_bom(text);
  std::vector<std::string> columns;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::vector<std::pair<std::size_t, std::string>>> sparse_rows;

  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;

    nlohmann::ordered_json obj;
    try {
      obj = nlohmann::ordered_json::parse(line);
    } catch (const nlohmann::ordered_json::parse_error& e) {
      throw UserError(std::string(source) + ":" + std::to_string(line_no) +
                      ": invalid JSON: " + e.what());
    }
    if (!obj.is_object()) {
      throw UserError(std::string(source) + ":" + std::to_string(line_no) +
                      ": expected a JSON object");
    }
    auto& cells = sparse_rows.emplace_back();
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      const std::string& key = it.key();
      if (key.empty()) {
        throw UserError(std::string(source) + ":" + std::to_string(line_no) +
                        ": empty column name");
      }
      auto [pos, inserted] = index.try_emplace(key, columns.size());
      if (inserted) columns.push_back(key);
      cells.emplace_back(pos->second, json_cell(it.value(), source, line_no, key));
    }
  }

  std::vector<std::vector<std::string>> rows;
  rows.reserve(sparse_rows.size());
  for (auto& cells : sparse_rows) {
    std::vector<std::string> row(columns.size());
    for (auto& [col, value] : cells) row[col] = std::move(value);
    rows.push_back(std::move(row));
  }
  return Table(std::move(columns), std::move(rows));
}

std::string format_csv(const Table& table) {
  std::string out;
  const bool sole = table.num_columns() == 1;
  auto emit_row = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out.push_back(',');
      append_csv_field(out, cells[c], sole);
    }
    out.push_back('\n');
  };
  emit_row(table.columns());
  for (std::size_t r = 0; r < table.num_rows(); ++r) emit_row(table.row(r));
  return out;
}

std::string format_jsonl(const Table& table) {
  std::string out;
  for (std::size_t r = 0; r < table.num_rows(); ++r) {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < table.num_columns(); ++c) {
      obj[table.columns()[c]] = table.cell(r, c);
    }
    out += obj.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
    out.push_back('\n');
  }
  return out;
}

Table load_table(const std::filesystem::path& path, TableFormat format) {
  const std::string text = read_text_file(path);
  const std::string source = path.string();
  return format == TableFormat::kCsv ? parse_csv(text, source)
                                     : parse_jsonl(text, source);
}

Table load_table(const std::filesystem::path& path) {
  return load_table(path, format_from_path(path));
}

void write_table(const Table& table, const std::filesystem::path& path,
                 TableFormat format) {
  write_text_file(path, format == TableFormat::kCsv ? format_csv(table)
                                                    : format_jsonl(table));
}

void write_table(const Table& table, const std::filesystem::path& path) {
  write_table(table, path, format_from_path(path));
}

}  // namespace reclink
