#pragma once

#include <stdexcept>
#include <string>

namespace stflow {

// Argument outside the parametric domain of a knot vector or patch.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Singular or inverted mapping. Carries the element id when known (-1 otherwise).
class GeometryError : public std::runtime_error {
 public:
  explicit GeometryError(const std::string& what, long element = -1)
      : std::runtime_error(element >= 0 ? what + " (element " + std::to_string(element) + ")"
                                        : what),
        element_(element) {}
  long element() const { return element_; }

 private:
  long element_;
};

// Mesh-level structural violations: broken extrusion, non-periodic end slices,
// constraint conflicts.
class StructureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, int iterations = -1)
      : std::runtime_error(iterations >= 0
                               ? what + " after " + std::to_string(iterations) + " iterations"
                               : what),
        iterations_(iterations) {}
  int iterations() const { return iterations_; }

 private:
  int iterations_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Sample sequences that do not converge monotonically.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed textual input such as an invalid NACA designation.
class ParseError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace stflow
