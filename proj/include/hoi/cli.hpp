#pragma once

#include <ostream>

namespace hoi {

// The whole command-line surface behind the hoidet binary, exposed as a
// function so tests can drive it with captured streams. Tables go to out,
// diagnostics to err. Returns 0 on success, 1 on runtime failure, 2 on
// usage errors.
int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hoi
