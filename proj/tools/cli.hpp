#pragma once

#include <iosfwd>

namespace codid::cli {

/// Exit codes: 0 success, 2 invalid input (bad data or flags), 1 runtime failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace codid::cli
