#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace superct {

inline constexpr const char* kVersion = "1.0.0";

/// Exit codes: 0 success, 1 I/O or format failure, 2 bad arguments or
/// configuration, 3 numerical failure.
int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace superct
