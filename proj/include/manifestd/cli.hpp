#pragma once

#include <iosfwd>

namespace manifestd::cli {

// Stable exit-code contract.
enum ExitCode : int {
    kOk = 0,
    kConfig = 1,
    kPolicy = 2,
    kKey = 3,
    kVerify = 4,
    kStorage = 5,
};

// Entry point of the manifestd command; main() forwards here so tests can
// drive subcommands in-process.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace manifestd::cli
