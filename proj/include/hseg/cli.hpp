#pragma once

#include <string>
#include <vector>

namespace hseg {

// Batch CLI entry point. Exit codes: 0 success, 2 configuration/usage error,
// 1 runtime error.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, const char* const* argv);

} // namespace hseg
