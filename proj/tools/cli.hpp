#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ppf::cli {

/// Stable process exit codes.
enum ExitCode : int {
    kOk = 0,
    kInputError = 2,
    kInfeasible = 3,    ///< every candidate pruned, an empty root, or a certificate that fails verification
};

/// Runs one command line (without the program name). Never throws; problems become messages on `err` and an exit
/// code. Every command that gets past argument parsing writes `manifest.json` into its output directory.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

}
