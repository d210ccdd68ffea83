#pragma once

#include <stdexcept>
#include <string>

namespace bangoff {

// Bad arguments: non-finite entries, negative durations, dimension mismatch.
class invalid_input : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An iterative kernel failed to converge (e.g. Jacobi sweep cap).
class numerical_failure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parameters outside the range where an analytic formula holds.
class out_of_regime : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A bisection bracket whose endpoints do not straddle the predicate.
class bracketing_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Requested grid or sample count exceeds the configured cap.
class resource_limit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bangoff
