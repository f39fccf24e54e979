#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tlsaudit::cli
{

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitFindings = 2;

/// `args` excludes the program name. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace tlsaudit::cli
