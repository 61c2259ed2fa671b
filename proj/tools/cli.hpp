#pragma once

#include <iosfwd>

namespace gradpce {

/// Entry point of the gradpce tool. Returns 0 on success, 2 on bad flags and
/// 1 on runtime failure (with a JSON error object on `err`).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gradpce
