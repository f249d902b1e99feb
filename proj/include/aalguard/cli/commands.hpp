#pragma once

#include <ostream>

namespace aalguard::cli {

// `aal-guard <load|infer|explain|query|classify|scenario|serve|hash-secret> [flags]`.
// Exit codes: 0 success, 1 parse/validation/usage/scenario mismatch, 2 I/O.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace aalguard::cli
