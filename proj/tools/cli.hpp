#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ceg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitPartial = 3;
inline constexpr int kExitUsage = 64;

// Runs one command line (argv[0] is the program name) and returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ceg::cli
