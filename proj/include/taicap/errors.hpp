#pragma once

#include <stdexcept>
#include <string>

namespace taicap {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Parameter set or scenario description that cannot be solved as given.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// No path with strictly positive consumption exists.
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Iterative solver gave up. Carries the largest residual and where it sat.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double max_residual, int worst_index)
        : std::runtime_error(what), max_residual_(max_residual), worst_index_(worst_index) {}

    double max_residual() const noexcept { return max_residual_; }
    int worst_index() const noexcept { return worst_index_; }

private:
    double max_residual_;
    int worst_index_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace taicap
