#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ttpp {

/// Entry point of the `ttpp` tool. `args` excludes the program name.
/// Returns 0 on success; diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ttpp
