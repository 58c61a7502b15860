#pragma once

#include <atomic>
#include <iosfwd>
#include <string>
#include <vector>

namespace vmsim::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kConfig = 2,
    kFailure = 3,
    kPartial = 4,
};

/// Runs one command line (without the program name). Never throws; every
/// failure maps to an exit code with a message on `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// `times serve` polls this flag; the executable sets it from SIGINT/SIGTERM.
std::atomic<bool>& shutdown_flag();

} // namespace vmsim::cli
