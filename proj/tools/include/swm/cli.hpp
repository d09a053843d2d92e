#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace swm::cli {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kUsage = 2,
    kMissingFile = 3,
    kFormat = 4,
    kShapeMismatch = 5,
};

/// Runs one `swm` command line. `args` excludes the program name. Command
/// summaries go to `out`; failures are reported on `err` as a single JSON
/// object and mapped to an ExitCode.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, const char* const* argv);

}  // namespace swm::cli
