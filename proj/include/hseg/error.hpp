#pragma once

#include <stdexcept>
#include <string>

namespace hseg {

// Invalid configuration or operator spec (bad shapes, bad JSON, bad
// divisibility). CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Failure while running an otherwise valid configuration (missing weight,
// I/O failure). CLI maps this to exit code 1.
struct ExecError : std::runtime_error {
    explicit ExecError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace hseg
