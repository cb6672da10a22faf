#pragma once

// Bracketed scalar root finding shared by the state-evolution and boundary
// solvers. Brackets are refined with TOMS 748 (bisection safeguarded by
// secant / inverse-cubic steps).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include <boost/math/tools/toms748_solve.hpp>

#include "crescent/errors.hpp"

namespace crescent::roots {

struct Bracket {
  double lo;
  double hi;
  double f_lo;
  double f_hi;
};

/// Relative bracket width at which refinement stops.
inline constexpr double kBracketRelTol = 1e-12;

namespace detail {

struct width_tolerance {
  double rel;
  bool operator()(double a, double b) const noexcept {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
    return std::abs(b - a) <= rel * scale || std::abs(b - a) < 1e-300;
  }
};

}  // namespace detail

/// Refines a sign-changing bracket. `f_lo` and `f_hi` must have opposite
/// signs (or one of them be zero). Returns the endpoint of the final bracket
/// with the smaller |f|.
template <class F>
double refine(F&& f, Bracket b, double rel_tol = 1e-15, std::uintmax_t max_iter = 400) {
  if (b.f_lo == 0.0) return b.lo;
  if (b.f_hi == 0.0) return b.hi;
  if ((b.f_lo > 0.0) == (b.f_hi > 0.0)) {
    throw convergence_error("root bracket [" + std::to_string(b.lo) + ", " + std::to_string(b.hi) +
                            "] does not change sign");
  }
  std::uintmax_t iters = max_iter;
  const auto [a, c] = boost::math::tools::toms748_solve(
      f, b.lo, b.hi, b.f_lo, b.f_hi, detail::width_tolerance{rel_tol}, iters);
  if (iters >= max_iter) {
    throw convergence_error("root refinement did not converge in bracket [" + std::to_string(b.lo) +
                            ", " + std::to_string(b.hi) + "]");
  }
  const double fa = f(a);
  const double fc = f(c);
  return std::abs(fa) <= std::abs(fc) ? a : c;
}

/// Walks downward from `start` in steps of `step` until `f` changes sign
/// relative to f(start) or `stop` is passed. Returns the sign-changing
/// bracket nearest `start`, i.e. the one containing the largest root below
/// `start`.
template <class F>
std::optional<Bracket> scan_down(F&& f, double start, double stop, double step) {
  double hi = start;
  double f_hi = f(hi);
  if (f_hi == 0.0) return Bracket{hi, hi, 0.0, 0.0};
  while (hi > stop) {
    const double lo = std::max(hi - step, stop);
    const double f_lo = f(lo);
    if (f_lo == 0.0 || (f_lo > 0.0) != (f_hi > 0.0)) {
      return Bracket{lo, hi, f_lo, f_hi};
    }
    hi = lo;
    f_hi = f_lo;
  }
  return std::nullopt;
}

/// For f increasing on (0, inf): expands [lo, hi] geometrically until
/// f(lo) < 0 < f(hi) or the limits are reached.
template <class F>
std::optional<Bracket> expand_increasing(F&& f, double lo, double hi, double lo_limit = 1e-300,
                                         double hi_limit = 1e300, double factor = 10.0) {
  double f_lo = f(lo);
  while (f_lo > 0.0 && lo > lo_limit) {
    hi = lo;
    lo = std::max(lo / factor, lo_limit);
    f_lo = f(lo);
  }
  if (f_lo > 0.0) return std::nullopt;
  double f_hi = f(hi);
  while (f_hi < 0.0 && hi < hi_limit) {
    lo = hi;
    f_lo = f_hi;
    hi = std::min(hi * factor, hi_limit);
    f_hi = f(hi);
  }
  if (f_hi < 0.0) return std::nullopt;
  return Bracket{lo, hi, f_lo, f_hi};
}

}  // namespace crescent::roots
