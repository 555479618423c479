#pragma once
#include <stdexcept>
#include <string>

namespace cggm {

/// Bad caller input: shape mismatch, non-finite entries, malformed files.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A quantity is undefined at the given argument (e.g. log det of a non-PD matrix).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A matrix that must be inverted is singular.
class RankError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Positive definiteness was lost during an iterative update.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An invariant of the algorithm was violated (a bug, not bad input).
class InternalError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Iteration budget exhausted before the tolerance was met.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace cggm
