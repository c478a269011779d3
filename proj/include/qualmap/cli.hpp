#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace qualmap {

// Process exit codes.
enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitMissingInput = 2,
    kExitParse = 3,
    kExitNumeric = 4,
    kExitIo = 5,
};

// Entry point for the `qualmap` tool; args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qualmap
