#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace occnn::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitPartialFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitCorrupt = 3;
inline constexpr int kExitDivergence = 4;

/// Runs the `occnn` command line: train | score | benchmark | synth.
/// args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace occnn::cli
