#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace allact::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitNumeric = 2;
inline constexpr int kExitCheckFailed = 3;

// argv[0] is the program name. Output files go under --out; progress and
// errors go to err.
int RunCommand(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace allact::cli
