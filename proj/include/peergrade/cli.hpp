#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace peergrade::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes: 0 success, 1 malformed input, 2 domain violation.
enum ExitCode : int { kOk = 0, kBadInput = 1, kDomainViolation = 2 };

/// Runs the `peergrade` command line. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace peergrade::cli
