#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ted::cli {

/// Exit codes: 0 success, 2 configuration error, 3 parse error, 4 compute error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitParse = 3;
inline constexpr int kExitCompute = 4;

/// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace ted::cli
