#pragma once

#include <iosfwd>

namespace covuln {

/// Entry point of the `covuln` tool. Exit codes: 0 success, 1 run failure
/// (aborted run, missed acceptance threshold, failed conformance check,
/// trainer error), 2 usage error or missing input/artifact.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace covuln
