#pragma once

#include <iosfwd>

namespace ensemble_ols::cli {

/// Exit codes: 0 success, 1 validation failure, 2 usage or config error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ensemble_ols::cli
