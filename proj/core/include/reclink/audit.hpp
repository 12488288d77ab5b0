#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "reclink/cluster.hpp"
#include "reclink/link_result.hpp"

namespace reclink {

// Audit sidecars, one JSON object per line:
//   {"type":"match","query":0,"key":3,"score":0.91,"rank":1}
//   {"type":"unmatched","query":1,"reason":"below_threshold"}
//   {"type":"cluster","row_id":4,"cluster":2,"representative":1}
std::string format_link_audit(const LinkResult& result);
std::string format_cluster_audit(const ClusterAssignment& assignment);

LinkResult parse_link_audit(std::string_view text);
LinkResult load_link_audit(const std::filesystem::path& path);

// Writes the whole file or throws UserError.
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace reclink
