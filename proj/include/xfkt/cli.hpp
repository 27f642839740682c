#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "xfkt/error.hpp"

namespace xfkt {

// Process exit codes.
enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,      // bad flags or arguments
    kExitIo = 2,         // missing or unwritable files
    kExitProvider = 3,   // provider failure, auth, budget, replay miss
    kExitData = 4,       // malformed or inconsistent input data
    kExitResults = 5,    // corrupt or incomparable result directories
};

int exit_code_for(ErrorKind kind) noexcept;

// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace xfkt
