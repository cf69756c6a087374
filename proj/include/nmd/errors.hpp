#pragma once

#include <stdexcept>
#include <string>

namespace nmd {

/// Bad input: wrong dimension, out-of-range parameter, empty segment.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Eigenvectors requested at (or numerically at) an exact surface intersection.
class DegeneratePointError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Iterative eigensolver did not converge.
class SolverFailure : public std::runtime_error {
public:
    SolverFailure(const std::string& what, int iterations, int converged)
        : std::runtime_error(what), iterations_(iterations), converged_(converged) {}
    int iterations() const noexcept { return iterations_; }
    int converged() const noexcept { return converged_; }

private:
    int iterations_;
    int converged_;
};

class NumericalUnderflow : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A trajectory produced no re-initialization events inside (0, T).
class EmptyEvents : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InsufficientData : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace nmd
