#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nkdb::cli {

/// Runs one invocation. `args[0]` is the program name.
/// Returns 0 on success, 1 on usage errors, 2 on data or model errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nkdb::cli
