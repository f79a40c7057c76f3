#pragma once

#include <stdexcept>
#include <string>

namespace isospec {

// Parameter sets that violate a structural precondition (antisymmetry,
// dimension mismatch, algebraic constraint required by a construction).
struct invalid_params : std::runtime_error {
  explicit invalid_params(const std::string& msg) : std::runtime_error(msg) {}
};

// Evaluation requested inside the guard band around a singular locus.
struct singularity_error : std::runtime_error {
  explicit singularity_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Iterative procedure failed (bracket not found, eigensolver misuse, ...).
struct solver_error : std::runtime_error {
  explicit solver_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace isospec
