#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cfpa::cli {

/// Runs the command line `args` (without the program name). Returns the
/// process exit code; 0 iff the command succeeded.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace cfpa::cli
