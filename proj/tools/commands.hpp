#pragma once

#include <ostream>

namespace selfconv::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kFormat = 3, kNumeric = 4 };

/// Parses argv and runs one subcommand: match, denoise, addnoise, psnr, bench.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace selfconv::cli
