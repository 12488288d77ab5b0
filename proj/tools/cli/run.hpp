#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "command_plan.hpp"

namespace reclink::cli {

// Executes a plan. Data goes to the --out files (or `out` when absent),
// progress and the summary to `log`. Returns 0, 1 (user error) or 2
// (provider, training or internal error). Outputs are written only after the
// command succeeded.
int run(const CommandPlan& plan, std::ostream& out, std::ostream& log);

// parse_and_validate + run with the usual exit-code mapping.
int main_entry(const std::vector<std::string>& args, std::ostream& out,
               std::ostream& log, const EnvLookup& env = process_env);

}  // namespace reclink::cli
