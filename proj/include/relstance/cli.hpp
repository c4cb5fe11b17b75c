#pragma once

#include <iosfwd>

namespace relstance {

/// Runs one subcommand. Returns 0 on success, 2 on usage errors, 1 when a
/// precondition fails (bad input file, missing artifact, failed check).
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int dispatch(int argc, const char* const* argv);

}  // namespace relstance
