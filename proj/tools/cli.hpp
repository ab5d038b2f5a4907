#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace posesmooth::cli
{
// Runs one command line (args excludes the program name). Returns the exit
// code: 0 success, 2 invalid input or usage, 1 run-time failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace posesmooth::cli
