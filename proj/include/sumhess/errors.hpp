#pragma once

#include <stdexcept>
#include <string>

namespace sumhess {

/// A computation left the regime where the algorithm is defined (singular
/// linear system, eigensolver non-convergence, loss of admissibility).
class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

/// An internal invariant failed; indicates a bug or an exhausted retry budget.
class internal_error : public std::runtime_error {
public:
    explicit internal_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sumhess
