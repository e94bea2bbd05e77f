#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tshoot {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

// Runs the command line `args` (without the program name). Interactive
// commands read from `in`.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
            std::ostream& err);

}  // namespace tshoot
