#pragma once

#include <iosfwd>

namespace ecol {

// Command-line entry point: preprocess, build-index, train, predict,
// evaluate. Returns the process exit code (0 success, 2 usage or data error,
// 1 internal error). Streams are injectable so tests can run commands
// in-process.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace ecol
