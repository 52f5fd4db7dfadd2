#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ack {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;
inline constexpr int kExitInfeasible = 4;

// Runs one `ack <subcommand> ...` invocation; args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ack
