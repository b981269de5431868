#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace xfmr::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kIo = 2,
    kNumeric = 3,
};

/// Runs one subcommand. `args` excludes the program name. Diagnostics go to
/// `err` as a single `error=<kind> code=<n> message="..."` line.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace xfmr::cli
