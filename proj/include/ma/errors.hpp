#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ma {

// Base for every failure the toolkit reports. Subtypes distinguish caller
// mistakes (bad arguments, malformed files) from numerical outcomes
// (non-convergence, lost ellipticity) so drivers can map them to exit codes.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Two fields live on incompatible grids, or a field is used with a
// topology/shape the operation does not accept.
class spec_mismatch_error : public error {
 public:
  using error::error;
};

// A scalar argument is out of its documented range.
class parameter_error : public error {
 public:
  using error::error;
};

// A field failed the discrete convexity test where convexity is required.
class not_convex_error : public error {
 public:
  using error::error;
};

// Right-hand side not strictly positive: the determinant equation leaves the
// elliptic branch.
class ellipticity_error : public error {
 public:
  using error::error;
};

// A density vanished (or lost positivity) where positivity is required.
class positivity_error : public error {
 public:
  using error::error;
};

// Periodic problem with an incompatible cell average.
class compatibility_error : public error {
 public:
  using error::error;
};

// Vorticity density whose cell average is not 1.
class solvability_error : public error {
 public:
  using error::error;
};

// Explicit time step violates the CFL restriction.
class step_size_error : public error {
 public:
  using error::error;
};

// An iterative solve ran out of iterations. Carries the last residual so
// callers can report how far it got.
class no_convergence_error : public error {
 public:
  no_convergence_error(const std::string& what, double residual, int iters)
      : error(what), residual(residual), iterations(iters) {}
  double residual = 0.0;
  int iterations = 0;
};

// A constraint system has no solution. For cyclical-monotonicity failures the
// witness holds the violating cycle as point indices.
class infeasible_error : public error {
 public:
  infeasible_error(const std::string& what, std::vector<int> cycle = {})
      : error(what), witness(std::move(cycle)) {}
  std::vector<int> witness;
};

// Malformed text input; line is 1-based.
class parse_error : public error {
 public:
  parse_error(const std::string& what, std::size_t line)
      : error(what + " (line " + std::to_string(line) + ")"), line(line) {}
  std::size_t line = 0;
};

}  // namespace ma
