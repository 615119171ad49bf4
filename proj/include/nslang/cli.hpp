#pragma once

#include <iosfwd>

namespace nslang::cli {

/// Exit codes: 0 success, 2 usage or validation error, 3 numerical failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

int run(int argc, const char* const* argv, std::ostream& out,
        std::ostream& err);
int run(int argc, char** argv);

}  // namespace nslang::cli
