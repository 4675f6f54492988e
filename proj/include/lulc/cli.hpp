#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lulc {

// Runs one subcommand; args excludes the program name. Returns 0 on success,
// 1 for usage errors, 2 for data/format errors and 3 for numerical failures.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, char** argv);

}  // namespace lulc
