#pragma once

#include <stdexcept>
#include <string>

namespace crescent {

/// Invalid arguments or malformed configuration. Maps to CLI exit status 2.
class input_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A requested value lies outside the range the model can realize.
/// Carries the achievable interval.
class range_error : public input_error {
 public:
  range_error(const std::string& what, double lo, double hi)
      : input_error(what), lo_(lo), hi_(hi) {}
  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }

 private:
  double lo_;
  double hi_;
};

/// No solution exists for the given shape parameters (e.g. above the
/// Donoho-Tanner transition). Maps to exit status 3.
class infeasible_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative solver failed to converge or the design is degenerate.
/// Maps to exit status 4.
class convergence_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class degenerate_design_error : public convergence_error {
 public:
  using convergence_error::convergence_error;
};

}  // namespace crescent
