#pragma once

namespace fbench::cli {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitPartial = 3 };

// Entry point of the `fbench` executable.
int run_cli(int argc, char** argv);

}  // namespace fbench::cli
