#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hwdnet::cli {

// Runs one command line (args exclude the program name). Exit codes: 0 on
// success, 1 on invalid input, 2 on runtime failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hwdnet::cli
