#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace corrprobit::cli {

// Runs one command line; returns the process exit code (0 ok, 2 input, 3 numeric, 4 infeasible).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace corrprobit::cli
