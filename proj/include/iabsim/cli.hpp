#pragma once

#include <iosfwd>

namespace iabsim {

/// Parses flags, runs the campaign and writes the requested outputs.
/// Returns 0 on success, 2 for configuration errors, 1 for simulation errors.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace iabsim
