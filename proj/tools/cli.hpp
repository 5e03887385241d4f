#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace critstep::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitNumerical = 1;
inline constexpr int kExitConfig = 2;

/// Parses `args` (without the program name) and runs one command. Datasets
/// go to --output or to `out`; diagnostics and error records go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace critstep::cli
