#pragma once

#include <string>
#include <vector>

namespace hypoql::cli {

/// Entry point shared by the binary and the tests.
/// Exit codes: 0 success, 1 usage/config/input-format error, 2 numerical failure.
int run(const std::vector<std::string>& args);

}  // namespace hypoql::cli
