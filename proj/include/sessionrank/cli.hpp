#pragma once

#include <string>
#include <vector>

namespace sessionrank {

// Runs the command line (args exclude the program name). Exit codes:
// 0 success, 1 usage error, 2 data error, 3 numerical failure.
int run_cli(std::vector<std::string> args);

}  // namespace sessionrank
