#pragma once

#include <iosfwd>

namespace cascade::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Entry point for `cascade-cli <validate|run|sweep|analyze> ...`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cascade::cli
