#pragma once

namespace surme::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kValidation = 2,
  kNumerical = 3,
};

/// Entry point shared by the executable and the tests.
int cli_main(int argc, char** argv);

}  // namespace surme::cli
