#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace dsner {

// `args` excludes the program name. Exit codes: 0 success or help, 1 runtime failure, 2 usage error.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_main(int argc, char** argv);

}  // namespace dsner
