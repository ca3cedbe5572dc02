#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace e2emd::cli {

enum ExitCode : int { kOk = 0, kRuntimeError = 1, kUsageError = 2 };

// Runs one command line (args[0] is the program name). JSON results go to
// `out`; the resolved-config banner, progress and errors go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace e2emd::cli
