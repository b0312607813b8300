#pragma once

#include <iosfwd>

namespace zlse {

// Entry point of the `zlse` tool. Returns the process exit code:
// 0 success, 1 usage, 2 parse/config, 3 geometry, 4 numeric failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace zlse
