#pragma once

#include <stdexcept>
#include <string>

namespace ipn {

// Argument outside the domain of an operation (x inside a support, z at an atom, ...).
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid configuration or construction arguments.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Iterative solver failed to reach the requested tolerance.
struct SolverError : std::runtime_error {
    SolverError(const std::string& what, double residual)
        : std::runtime_error(what), last_residual(residual) {}
    double last_residual;
};

}  // namespace ipn
