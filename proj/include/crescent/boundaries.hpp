#pragma once

// The two boundary curves of the Lasso crescent in the (TPP, FDP) plane.
//
// Lower boundary (maximal effect size heterogeneity): t_delta(u) is the
// largest positive root of
//
//   2(1-eps)[(1+t^2)Phi(-t) - t phi(t)] + eps(1+t^2) - delta      1 - u
//   ---------------------------------------------------------  =  -------------
//        eps[(1+t^2)(1 - 2Phi(-t)) + 2t phi(t)]                   1 - 2Phi(-t)
//
// and q_delta(u) = 2(1-eps)Phi(-t) / (2(1-eps)Phi(-t) + eps u).
//
// Upper boundary (all effects equal, noiseless): varsigma(alpha) solves the
// noiseless calibration equation written in terms of varsigma = M/tau - alpha,
// t_nabla(u) is the largest alpha with Phi(varsigma) + Phi(-2alpha - varsigma) = u,
// and q_nabla uses the same ratio with t_nabla in place of t_delta.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "crescent/errors.hpp"
#include "crescent/gauss.hpp"
#include "crescent/prior.hpp"
#include "crescent/roots.hpp"
#include "crescent/state_evolution.hpp"

namespace crescent {

struct CrescentPoint {
  double u = 0.0;
  double t_delta = 0.0;
  double q_delta = 0.0;
  double varsigma = 0.0;
  double t_nabla = 0.0;
  double q_nabla = 0.0;
};

struct CrescentTable {
  std::vector<CrescentPoint> points;
  /// Smallest and largest grid u at which both boundaries were solved.
  double feasible_lo = 0.0;
  double feasible_hi = 0.0;
  /// True when some grid points were dropped as infeasible.
  bool truncated = false;
};

struct TouchingPoint {
  double gamma_tail = 0.0;  // cumulative weight of the levels at or above this one
  double u = 0.0;
  double t_delta = 0.0;
  double q_delta = 0.0;
  int iterations = 0;
};

/// Residual tolerance for boundary root equations.
inline constexpr double kBoundaryTol = 1e-9;

namespace detail {

inline ModelShape noiseless(ModelShape shape) {
  shape.sigma = 0.0;
  return shape;
}

inline double boundary_fdp(double epsilon, double t, double u) {
  if (u <= 0.0 || std::isinf(t)) return 0.0;
  const double null_part = 2.0 * (1.0 - epsilon) * Phi(-t);
  const double denom = null_part + epsilon * u;
  return denom > 0.0 ? null_part / denom : 0.0;
}

// Pieces of the lower-boundary equation at t:
//   num = 2(1-eps)K(t) + eps(1+t^2) - delta,  den = eps[(1+t^2)(1-2Phi(-t)) + 2t phi(t)],
//   s = 1 - 2Phi(-t). The equation is num / den = (1-u)/s; multiplied out,
//   F(t; u) = num * s - (1 - u) den has the same sign as LHS - RHS for t > 0.
struct LowerPieces {
  double num;
  double den;
  double s;
};

inline LowerPieces lower_pieces(double t, const ModelShape& shape) {
  const double eps = shape.epsilon;
  const double tail = Phi(-t);
  const double s = 1.0 - 2.0 * tail;
  const double num = 2.0 * (1.0 - eps) * upper_second_moment(t) + eps * (1.0 + t * t) - shape.delta;
  const double den = eps * ((1.0 + t * t) * s + 2.0 * t * phi(t));
  return {num, den, s};
}

inline double lower_product_form(double t, double u, const ModelShape& shape) {
  const auto p = lower_pieces(t, shape);
  return p.num * p.s - (1.0 - u) * p.den;
}

}  // namespace detail

/// LHS - RHS of the lower-boundary equation.
inline double lower_boundary_residual(double t, double u, const ModelShape& shape) {
  const auto p = detail::lower_pieces(t, shape);
  return p.num / p.den - (1.0 - u) / p.s;
}

/// Lower-boundary equation sampled on the downward scan grid
/// t = 60, 59.95, ... Reused across many u at a fixed shape.
class LowerBoundarySolver {
 public:
  explicit LowerBoundarySolver(const ModelShape& shape) : shape_(shape) {
    shape_.validate();
    const int steps = static_cast<int>(std::lround(kScanTop / kScanStep));
    for (int k = 0; k < steps; ++k) {
      const double t = kScanTop - k * kScanStep;
      const auto p = detail::lower_pieces(t, shape_);
      grid_.push_back({t, p.num * p.s, p.den});
    }
    const auto p = detail::lower_pieces(kScanBottom, shape_);
    grid_.push_back({kScanBottom, p.num * p.s, p.den});
  }

  /// Largest positive root in t for target power u in (0, 1]. Returns +inf
  /// when the root lies above the scan top (u -> 0); throws
  /// infeasible_error when no root exists (above the phase transition).
  double solve(double u) const {
    if (!(u > 0.0 && u <= 1.0)) throw input_error("t_delta: u must lie in (0, 1]");
    auto value = [&](const Node& n) { return n.ns - (1.0 - u) * n.den; };
    const double top = value(grid_.front());
    if (top < 0.0) return std::numeric_limits<double>::infinity();
    if (top == 0.0) return grid_.front().t;
    for (std::size_t i = 1; i < grid_.size(); ++i) {
      const double v = value(grid_[i]);
      if (v <= 0.0) {
        if (v == 0.0) return grid_[i].t;
        auto f = [&](double t) { return detail::lower_product_form(t, u, shape_); };
        const double t = roots::refine(
            f, {grid_[i].t, grid_[i - 1].t, v, value(grid_[i - 1])}, 1e-15);
        if (std::abs(lower_boundary_residual(t, u, shape_)) > kBoundaryTol) {
          throw convergence_error("t_delta root at u = " + std::to_string(u) +
                                  " failed the residual check");
        }
        return t;
      }
    }
    throw infeasible_error("lower boundary has no root at u = " + std::to_string(u) +
                           " (delta = " + std::to_string(shape_.delta) +
                           ", epsilon = " + std::to_string(shape_.epsilon) +
                           "): above the Donoho-Tanner transition");
  }

  const ModelShape& shape() const noexcept { return shape_; }

 private:
  struct Node {
    double t;
    double ns;   // num * s
    double den;
  };
  static constexpr double kScanBottom = 1e-6;
  ModelShape shape_;
  std::vector<Node> grid_;
};

inline double t_delta(double u, const ModelShape& shape) {
  if (!(u > 0.0 && u <= 1.0)) throw input_error("t_delta: u must lie in (0, 1]");
  return LowerBoundarySolver(shape).solve(u);
}

inline double q_delta(double u, const ModelShape& shape) {
  shape.validate();
  if (!(u >= 0.0 && u <= 1.0)) throw input_error("q_delta: u must lie in [0, 1]");
  if (u == 0.0) return 0.0;
  return detail::boundary_fdp(shape.epsilon, t_delta(u, shape), u);
}

/// Residual of the noiseless calibration equation in varsigma:
/// (1-eps) mse_null(alpha) + eps mse_signal(varsigma + alpha, alpha) - delta.
inline double varsigma_residual(double varsigma, double alpha, const ModelShape& shape) {
  return (1.0 - shape.epsilon) * mse_null(alpha) +
         shape.epsilon * mse_signal(varsigma + alpha, alpha) - shape.delta;
}

namespace detail {

// The residual is increasing in varsigma on (-alpha, inf) (soft-threshold risk
// grows with |signal|), so the largest root is the unique root there.
inline double solve_varsigma(double alpha, const ModelShape& shape,
                             std::optional<double> hint = std::nullopt) {
  auto G = [&](double s) { return varsigma_residual(s, alpha, shape); };
  const double g_low = G(-alpha);
  if (!(g_low < 0.0)) {
    throw infeasible_error("varsigma: alpha = " + std::to_string(alpha) +
                           " is not above alpha_min");
  }
  if (!(noiseless_saturation(shape, alpha) > 0.0)) {
    throw infeasible_error("varsigma: no root for alpha = " + std::to_string(alpha) +
                           " (below the noiseless admissible range)");
  }
  roots::Bracket br{-alpha, kScanTop, g_low, 0.0};
  bool have = false;
  if (hint) {
    const double lo = std::max(-alpha, *hint - 0.5);
    const double hi = *hint + 0.5;
    const double f_lo = G(lo);
    const double f_hi = G(hi);
    if (f_lo <= 0.0 && f_hi >= 0.0) {
      br = {lo, hi, f_lo, f_hi};
      have = true;
    }
  }
  if (!have) {
    double hi = kScanTop;
    double f_hi = G(hi);
    while (f_hi < 0.0) {
      hi *= 2.0;
      if (hi > 1e300) throw convergence_error("varsigma bracket expansion failed");
      f_hi = G(hi);
    }
    br.hi = hi;
    br.f_hi = f_hi;
  }
  const double s = roots::refine(G, br, 1e-15);
  if (std::abs(G(s)) > kBoundaryTol) {
    throw convergence_error("varsigma root at alpha = " + std::to_string(alpha) +
                            " failed the residual check");
  }
  return s;
}

inline double upper_tpp(double alpha, double varsigma) {
  return Phi(varsigma) + Phi(-2.0 * alpha - varsigma);
}

}  // namespace detail

/// Largest root varsigma of the noiseless homogeneous calibration equation.
inline double varsigma(double alpha, const ModelShape& shape) {
  const auto s0 = detail::noiseless(shape);
  s0.validate();
  detail::require_threshold(alpha, "varsigma");
  if (!(alpha > alpha_min(s0))) {
    throw infeasible_error("varsigma: alpha must exceed alpha_min");
  }
  return detail::solve_varsigma(alpha, s0);
}

struct UpperRoot {
  double t = 0.0;         // t_nabla
  double varsigma = 0.0;  // varsigma(t_nabla)
};

/// Upper-boundary equation Phi(varsigma(a)) + Phi(-2a - varsigma(a)) = u
/// sampled on the downward alpha grid 60, 59.95, ... down to the admissible
/// floor. Reused across many u at a fixed shape.
class UpperBoundarySolver {
 public:
  explicit UpperBoundarySolver(const ModelShape& shape) : shape_(detail::noiseless(shape)) {
    shape_.validate();
    floor_ = crescent::alpha_floor(shape_);
    std::optional<double> hint;
    const int steps = static_cast<int>(std::lround(kScanTop / kScanStep));
    for (int k = 0; k < steps; ++k) {
      const double a = kScanTop - k * kScanStep;
      if (a <= floor_) break;
      const double s = detail::solve_varsigma(a, shape_, hint);
      hint = s;
      grid_.push_back({a, s, detail::upper_tpp(a, s)});
    }
    const double a_f = floor_ + 1e-9 * std::max(1.0, floor_);
    if (grid_.empty() || grid_.back().alpha > a_f) {
      const double s = detail::solve_varsigma(a_f, shape_);
      grid_.push_back({a_f, s, detail::upper_tpp(a_f, s)});
    }
  }

  /// Largest alpha solving the equation for target u in (0, 1).
  UpperRoot solve(double u) const {
    if (!(u > 0.0 && u < 1.0)) throw input_error("t_nabla: u must lie in (0, 1)");
    // tpp increases as alpha decreases along the grid; find the first node
    // (from the top) where tpp - u >= 0.
    if (grid_.front().tpp - u >= 0.0) {
      throw range_error("t_nabla: u = " + std::to_string(u) + " needs alpha above the scan top",
                        grid_.front().tpp, 1.0);
    }
    for (std::size_t i = 1; i < grid_.size(); ++i) {
      const double v = grid_[i].tpp - u;
      if (v >= 0.0) {
        if (v == 0.0) return {grid_[i].alpha, grid_[i].varsigma};
        std::optional<double> hint = grid_[i].varsigma;
        auto F = [&](double a) {
          const double s = detail::solve_varsigma(a, shape_, hint);
          return detail::upper_tpp(a, s) - u;
        };
        const double a = roots::refine(
            F, {grid_[i].alpha, grid_[i - 1].alpha, v, grid_[i - 1].tpp - u}, 1e-15);
        const double s = detail::solve_varsigma(a, shape_, hint);
        if (std::abs(detail::upper_tpp(a, s) - u) > kBoundaryTol) {
          throw convergence_error("t_nabla root at u = " + std::to_string(u) +
                                  " failed the residual check");
        }
        return {a, s};
      }
    }
    throw infeasible_error("upper boundary has no root at u = " + std::to_string(u) +
                           "; achievable power is below " + std::to_string(grid_.back().tpp));
  }

  double alpha_floor() const noexcept { return floor_; }
  const ModelShape& shape() const noexcept { return shape_; }

 private:
  struct Node {
    double alpha;
    double varsigma;
    double tpp;
  };
  ModelShape shape_;
  double floor_ = 0.0;
  std::vector<Node> grid_;
};

inline UpperRoot t_nabla(double u, const ModelShape& shape) {
  if (!(u > 0.0 && u < 1.0)) throw input_error("t_nabla: u must lie in (0, 1)");
  return UpperBoundarySolver(shape).solve(u);
}

inline double q_nabla(double u, const ModelShape& shape) {
  if (!(u > 0.0 && u < 1.0)) throw input_error("q_nabla: u must lie in (0, 1)");
  return detail::boundary_fdp(shape.epsilon, t_nabla(u, shape).t, u);
}

/// Both boundaries on the grid u_j = j / (n_points + 1), j = 1..n_points.
/// Grid points where either boundary is infeasible are dropped and the
/// table is marked truncated; throws infeasible_error when nothing is left.
inline CrescentTable lasso_crescent(const ModelShape& shape, int n_points) {
  shape.validate();
  if (n_points < 1) throw input_error("n_points must be at least 1");
  const LowerBoundarySolver lower(shape);
  const UpperBoundarySolver upper(shape);
  CrescentTable table;
  for (int j = 1; j <= n_points; ++j) {
    const double u = static_cast<double>(j) / (n_points + 1);
    try {
      CrescentPoint pt;
      pt.u = u;
      pt.t_delta = lower.solve(u);
      pt.q_delta = detail::boundary_fdp(shape.epsilon, pt.t_delta, u);
      const auto up = upper.solve(u);
      pt.t_nabla = up.t;
      pt.varsigma = up.varsigma;
      pt.q_nabla = detail::boundary_fdp(shape.epsilon, up.t, u);
      table.points.push_back(pt);
    } catch (const infeasible_error&) {
      table.truncated = true;
    }
  }
  if (table.points.empty()) {
    throw infeasible_error("no grid point is feasible for delta = " + std::to_string(shape.delta) +
                           ", epsilon = " + std::to_string(shape.epsilon));
  }
  table.feasible_lo = table.points.front().u;
  table.feasible_hi = table.points.back().u;
  return table;
}

/// Points where the limiting trade-off curve of a multi-level heterogeneous
/// prior with level weights gamma touches the lower boundary. For each
/// cumulative tail weight g = gamma_j + ... + gamma_m the point solves
/// u = 2 Phi(-t_delta(u)) (1 - g) + g, found by damped fixed-point
/// iteration (damping 0.5, at most 200 iterations). The full-weight level
/// g = 1 gives u = 1. Returned in increasing u.
inline std::vector<TouchingPoint> touching_points(const std::vector<double>& gamma,
                                                  const ModelShape& shape) {
  shape.validate();
  if (gamma.empty()) throw input_error("touching_points: gamma must be nonempty");
  for (double g : gamma) {
    if (!(g > 0.0)) throw input_error("touching_points: gamma entries must be positive");
  }
  const double total = std::accumulate(gamma.begin(), gamma.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9) throw input_error("touching_points: gamma must sum to one");

  const LowerBoundarySolver lower(shape);
  std::vector<TouchingPoint> out;
  double tail = 0.0;
  for (auto it = gamma.rbegin(); it != gamma.rend(); ++it) {
    tail += *it;
    TouchingPoint tp;
    tp.gamma_tail = std::min(tail, 1.0);
    if (std::next(it) == gamma.rend()) tp.gamma_tail = 1.0;
    if (tp.gamma_tail >= 1.0) {
      tp.u = 1.0;
      tp.t_delta = lower.solve(1.0);
      tp.q_delta = detail::boundary_fdp(shape.epsilon, tp.t_delta, 1.0);
      out.push_back(tp);
      continue;
    }
    const double g = tp.gamma_tail;
    auto map = [&](double u) { return 2.0 * detail::Phi(-lower.solve(u)) * (1.0 - g) + g; };
    double u = g;
    bool converged = false;
    for (int k = 1; k <= 200; ++k) {
      const double next = 0.5 * u + 0.5 * map(u);
      tp.iterations = k;
      if (std::abs(next - u) <= 1e-14) {
        u = next;
        converged = true;
        break;
      }
      u = next;
    }
    if (!converged) {
      throw convergence_error("touching_points: fixed-point iteration for tail weight " +
                              std::to_string(g) + " did not converge; last iterate u = " +
                              std::to_string(u));
    }
    tp.u = u;
    tp.t_delta = lower.solve(u);
    tp.q_delta = detail::boundary_fdp(shape.epsilon, tp.t_delta, u);
    if (std::abs(u - (2.0 * detail::Phi(-tp.t_delta) * (1.0 - g) + g)) > kBoundaryTol) {
      throw convergence_error("touching_points: residual check failed at u = " +
                              std::to_string(u));
    }
    out.push_back(tp);
  }
  std::sort(out.begin(), out.end(),
            [](const TouchingPoint& a, const TouchingPoint& b) { return a.u < b.u; });
  return out;
}

}  // namespace crescent
