#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace reliagap {

/// Command-line entry point: subcommands stats, fit, simulate, plot and
/// manifest. Returns the process exit code; diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int cli_main(int argc, char** argv);

}  // namespace reliagap
