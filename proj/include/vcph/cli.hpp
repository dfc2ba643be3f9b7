#pragma once

#include <iosfwd>

namespace vcph {

inline constexpr const char* library_version = "0.1.0";

namespace cli {

// Exit codes: 0 success, 1 invalid input or arguments, 2 numerical failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

} // namespace cli
} // namespace vcph
