#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace beatforge::cli {

inline constexpr const char* kVersion = "0.1.0";

// Parses and runs one command line (args excludes the program name).
// Returns the process exit code; messages go to `out` and `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace beatforge::cli
