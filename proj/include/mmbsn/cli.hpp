#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mmbsn {

enum ExitCode : int { kExitOk = 0, kExitVerifyFailed = 1, kExitUsage = 2, kExitIo = 3 };

/// Entry point of the `mmbsn` executable; args exclude the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mmbsn
