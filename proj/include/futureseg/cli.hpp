#pragma once

#include <ostream>

namespace futureseg {

// Runs one subcommand (generate, train, eval, predict, gradcheck). Returns
// the process exit status: 0 on success, 1 on a runtime failure, 2 on bad
// usage or configuration.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace futureseg
