#pragma once

#include <string>
#include <vector>

namespace kwfp::cli {

// Entry point shared by the binary and the tests.
// Exit codes: 0 success, 1 usage error, 2 data or validation error.
int run(const std::vector<std::string>& args);

}  // namespace kwfp::cli
