#pragma once

#include <string>
#include <vector>

namespace brainalign {

/// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnv = "BRAINALIGN_OUT";

/// Runs the command-line frontend. Returns 0 on success, 1 on usage or
/// validation errors and 2 on runtime or numerical errors.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);  // args excludes the program name

}  // namespace brainalign
