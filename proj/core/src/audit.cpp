#include "reclink/audit.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "reclink/error.hpp"

namespace reclink {

std::string_view to_string(UnmatchedReason reason) {
  switch (reason) {
    case UnmatchedReason::kBelowThreshold: return "below_threshold";
    case UnmatchedReason::kEmptyBlock: return "empty_block";
    case UnmatchedReason::kInvalidEmbedding: return "invalid_embedding";
    case UnmatchedReason::kAssignmentConflict: return "assignment_conflict";
  }
  return "unknown";
}

std::optional<UnmatchedReason> parse_unmatched_reason(std::string_view text) {
  for (auto r : {UnmatchedReason::kBelowThreshold, UnmatchedReason::kEmptyBlock,
                 UnmatchedReason::kInvalidEmbedding,
                 UnmatchedReason::kAssignmentConflict}) {
    if (to_string(r) == text) return r;
  }
  return std::nullopt;
}

std::string format_link_audit(const LinkResult& result) {
  std::string out;
  for (const auto& m : result.matches) {
    nlohmann::ordered_json j{{"type", "match"},
                             {"query", m.query},
                             {"key", m.key},
                             {"score", m.score},
                             {"rank", m.rank}};
    out += j.dump();
    out.push_back('\n');
  }
  for (const auto& u : result.unmatched) {
    nlohmann::ordered_json j{{"type", "unmatched"},
                             {"query", u.query},
                             {"reason", to_string(u.reason)}};
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

std::string format_cluster_audit(const ClusterAssignment& assignment) {
  std::string out;
  for (std::size_t i = 0; i < assignment.row_ids.size(); ++i) {
    const auto label = assignment.labels[i];
    nlohmann::ordered_json j{{"type", "cluster"},
                             {"row_id", assignment.row_ids[i]},
                             {"cluster", label},
                             {"representative", assignment.representatives[label]}};
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

LinkResult parse_link_audit(std::string_view text) {
  LinkResult result;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    try {
      auto j = nlohmann::json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (type == "match") {
        result.matches.push_back({j.at("query").get<RowId>(), j.at("key").get<RowId>(),
                                  j.at("score").get<double>(), j.at("rank").get<int>()});
      } else if (type == "unmatched") {
        auto reason = parse_unmatched_reason(j.at("reason").get<std::string>());
        if (!reason) throw UserError("unknown reason");
        result.unmatched.push_back({j.at("query").get<RowId>(), *reason});
      } else {
        throw UserError("unknown record type '" + type + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw UserError("audit line " + std::to_string(line_no) + ": " + e.what());
    } catch (const UserError& e) {
      throw UserError("audit line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return result;
}

LinkResult load_link_audit(const std::filesystem::path& path) {
  return parse_link_audit(read_text_file(path));
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UserError("cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.close();
  if (!out) throw UserError("failed writing '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw UserError("failed reading '" + path.string() + "'");
  return std::move(buf).str();
}

}  // namespace reclink
