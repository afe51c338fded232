#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cogsig {

// Runs one `cogsig` command. `args` excludes the program name. Failures are
// written to `err` as a single {"error":{...}} record; the return value is
// the process exit code (0 on success, 1 for toolkit errors, 2 for usage
// errors).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cogsig
