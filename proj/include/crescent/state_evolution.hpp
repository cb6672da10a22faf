#pragma once

// Calibration equations of approximate message passing for the Lasso with a
// discrete effect-size prior:
//
//   tau^2  = sigma^2 + (1/delta) E(eta_{alpha tau}(Pi + tau W) - Pi)^2
//   lambda = (1 - (1/delta) P(|Pi + tau W| > alpha tau)) alpha tau
//
// and the asymptotic power / false discovery functions derived from them.
// Everything is parameterized by the normalized threshold alpha; lambda is
// reported alongside.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "crescent/errors.hpp"
#include "crescent/gauss.hpp"
#include "crescent/prior.hpp"
#include "crescent/roots.hpp"

namespace crescent {

struct StateEvolutionPoint {
  double alpha = 0.0;
  double tau = 0.0;
  double lambda = 0.0;
  ModelShape shape;
};

struct TradeoffPoint {
  double alpha = 0.0;
  double tau = 0.0;
  double lambda = 0.0;
  double tpp = 0.0;
  double fdp = 0.0;
};

enum class CurveKind { prior_specific, lower_boundary, upper_boundary };

struct TradeoffCurve {
  CurveKind kind = CurveKind::prior_specific;
  std::vector<TradeoffPoint> points;  // sorted by tpp ascending
};

/// Residual tolerance for the calibration equations.
inline constexpr double kEquationTol = 1e-10;

/// Largest alpha searched by the downward boundary scans.
inline constexpr double kScanTop = 60.0;
inline constexpr double kScanStep = 0.05;

namespace detail {

inline void check_consistent(const DiscretePrior& prior, const ModelShape& shape) {
  shape.validate();
  if (std::abs(prior.epsilon() - shape.epsilon) > 1e-9) {
    throw input_error("prior sparsity " + std::to_string(prior.epsilon()) +
                      " does not match shape epsilon " + std::to_string(shape.epsilon));
  }
}

// (1 - eps) E eta_alpha(W)^2 + sum_i p_i E(eta_alpha(v_i theta + W) - v_i theta)^2,
// i.e. the normalized risk with theta = 1/tau.
inline double normalized_risk(const DiscretePrior& prior, double alpha, double theta) {
  double risk = prior.null_mass() * mse_null(alpha);
  for (const auto& a : prior.atoms()) {
    risk += a.probability * mse_signal(a.value * theta, alpha);
  }
  return risk;
}

// P(|Pi + tau W| > alpha tau) over the full prior, zero atom included.
inline double selection_prob(const DiscretePrior& prior, double alpha, double tau) {
  double p = prior.null_mass() * 2.0 * detail::Phi(-alpha);
  for (const auto& a : prior.atoms()) {
    p += a.probability * excess_prob(a.value / tau, alpha);
  }
  return p;
}

// Signal-side exceedance P(|Pi* + tau W| > alpha tau), Pi* = Pi | Pi != 0.
inline double true_positive_prob(const DiscretePrior& prior, double alpha, double tau) {
  double u = 0.0;
  for (const auto& a : prior.atoms()) {
    u += a.probability * excess_prob(a.value / tau, alpha);
  }
  return u / prior.epsilon();
}

inline double fdp_from(double epsilon, double alpha, double tpp) {
  const double null_part = 2.0 * (1.0 - epsilon) * detail::Phi(-alpha);
  const double denom = null_part + epsilon * tpp;
  return denom > 0.0 ? null_part / denom : 0.0;
}

// Noiseless limit of the normalized first equation as tau -> 0:
// (1 - eps) mse_null(alpha) + eps (1 + alpha^2) - delta.
inline double noiseless_saturation(const ModelShape& shape, double alpha) {
  return (1.0 - shape.epsilon) * mse_null(alpha) + shape.epsilon * (1.0 + alpha * alpha) -
         shape.delta;
}

}  // namespace detail

/// Smallest admissible normalized threshold: 0 when delta >= 1, otherwise
/// the root of (1 + t^2) Phi(-t) - t phi(t) = delta / 2.
inline double alpha_min(const ModelShape& shape) {
  shape.validate();
  if (shape.delta >= 1.0) return 0.0;
  auto f = [&](double t) { return detail::upper_second_moment(t) - 0.5 * shape.delta; };
  // f(0) = 1/2 - delta/2 > 0 and f decreases to 0-, so [0, hi] brackets.
  double hi = 1.0;
  while (f(hi) > 0.0) hi *= 2.0;
  return roots::refine(f, {0.0, hi, f(0.0), f(hi)}, 1e-15);
}

/// Lower end of the alpha range on which the calibration equations have a
/// solution with tau > 0. For sigma > 0 this is alpha_min; in the noiseless
/// case tau -> 0 at the largest root of
/// (1 - eps) mse_null(alpha) + eps (1 + alpha^2) = delta, where power
/// reaches one.
inline double alpha_floor(const ModelShape& shape) {
  const double a0 = alpha_min(shape);
  if (shape.sigma > 0.0) return a0;
  auto h = [&](double a) { return detail::noiseless_saturation(shape, a); };
  const auto br = roots::scan_down(h, kScanTop, a0, kScanStep);
  if (!br) return a0;
  if (br->lo == br->hi) return br->lo;
  return std::max(a0, roots::refine(h, *br, 1e-15));
}

/// Residual of the normalized first calibration equation at (alpha, tau).
inline double tau_equation_residual(const DiscretePrior& prior, double alpha, double tau,
                                    const ModelShape& shape) {
  const double theta = 1.0 / tau;
  return shape.sigma * shape.sigma * theta * theta +
         detail::normalized_risk(prior, alpha, theta) / shape.delta - 1.0;
}

/// Solves the first calibration equation for tau at fixed alpha.
///
/// Works in theta = 1/tau after dividing by tau^2, which removes the trivial
/// tau = 0 root in the noiseless case. The normalized equation is increasing
/// in theta, so a geometric bracket search followed by TOMS 748 finds the
/// unique root.
inline double solve_tau_given_alpha(const DiscretePrior& prior, double alpha,
                                    const ModelShape& shape) {
  detail::check_consistent(prior, shape);
  detail::require_threshold(alpha, "solve_tau_given_alpha");
  const double a0 = alpha_min(shape);
  if (!(alpha > a0)) {
    throw infeasible_error("alpha = " + std::to_string(alpha) +
                           " is not above alpha_min = " + std::to_string(a0));
  }
  auto H = [&](double theta) {
    return shape.sigma * shape.sigma * theta * theta +
           detail::normalized_risk(prior, alpha, theta) / shape.delta - 1.0;
  };
  const auto br = roots::expand_increasing(H, 1e-8, 1e8);
  if (!br) {
    throw infeasible_error("no tau solves the calibration equation at alpha = " +
                           std::to_string(alpha) +
                           " (searched theta = 1/tau in [1e-300, 1e300]); the point lies below "
                           "the noiseless admissible range");
  }
  const double theta = roots::refine(H, *br, 1e-15);
  if (std::abs(H(theta)) > kEquationTol) {
    throw convergence_error("tau solve at alpha = " + std::to_string(alpha) +
                            " left residual " + std::to_string(H(theta)) + " in bracket [" +
                            std::to_string(br->lo) + ", " + std::to_string(br->hi) + "]");
  }
  return 1.0 / theta;
}

/// Full (alpha, tau, lambda) solution at a given alpha.
inline StateEvolutionPoint solve_at_alpha(const DiscretePrior& prior, double alpha,
                                          const ModelShape& shape) {
  const double tau = solve_tau_given_alpha(prior, alpha, shape);
  const double p = detail::selection_prob(prior, alpha, tau);
  return {alpha, tau, (1.0 - p / shape.delta) * alpha * tau, shape};
}

inline double lambda_of_alpha(const DiscretePrior& prior, double alpha, const ModelShape& shape) {
  return solve_at_alpha(prior, alpha, shape).lambda;
}

/// Lower end of the alpha range on which lambda > 0. Equals alpha_floor
/// except with noise and delta < 1, where lambda is negative just above
/// alpha_min.
inline double alpha_lambda_floor(const DiscretePrior& prior, const ModelShape& shape) {
  const double floor = alpha_floor(shape);
  if (shape.sigma == 0.0 || shape.delta >= 1.0) return floor;
  auto lam = [&](double a) { return lambda_of_alpha(prior, a, shape); };
  double lo = floor + 1e-9 * std::max(1.0, floor);
  double l_lo = lam(lo);
  if (l_lo > 0.0) return floor;
  double step = 1e-3 * std::max(1.0, floor);
  double hi = lo + step;
  double l_hi = lam(hi);
  while (!(l_hi > 0.0)) {
    if (step > 1e6) throw convergence_error("lambda stays nonpositive over the searched alpha range");
    lo = hi;
    l_lo = l_hi;
    step *= 2.0;
    hi = floor + step;
    l_hi = lam(hi);
  }
  return roots::refine(lam, {lo, hi, l_lo, l_hi}, 1e-15);
}

/// Max of the two calibration-equation residuals at a solved point.
inline double calibration_residual(const DiscretePrior& prior, const StateEvolutionPoint& pt) {
  const double r1 = tau_equation_residual(prior, pt.alpha, pt.tau, pt.shape);
  const double p = detail::selection_prob(prior, pt.alpha, pt.tau);
  const double lam = (1.0 - p / pt.shape.delta) * pt.alpha * pt.tau;
  const double r2 = (pt.lambda - lam) / std::max(1.0, std::abs(lam));
  return std::max(std::abs(r1), std::abs(r2));
}

/// Inverts the increasing map alpha -> lambda by bracketing in alpha.
inline StateEvolutionPoint solve_alpha_given_lambda(const DiscretePrior& prior, double lambda,
                                                    const ModelShape& shape) {
  detail::check_consistent(prior, shape);
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw input_error("lambda must be positive and finite");
  }
  const double floor = alpha_lambda_floor(prior, shape);
  auto lam = [&](double a) { return lambda_of_alpha(prior, a, shape); };

  double a_lo = floor + 1e-9 * std::max(1.0, floor);
  double l_lo = lam(a_lo);
  if (lambda < l_lo) {
    throw range_error("lambda = " + std::to_string(lambda) + " is below the achievable range [" +
                          std::to_string(l_lo) + ", inf)",
                      l_lo, std::numeric_limits<double>::infinity());
  }
  double a_hi = std::max(2.0 * a_lo, 1.0);
  double l_hi = lam(a_hi);
  while (l_hi < lambda) {
    if (a_hi > 1e8) {
      throw range_error("lambda = " + std::to_string(lambda) + " exceeds the searched range",
                        l_lo, l_hi);
    }
    a_lo = a_hi;
    l_lo = l_hi;
    a_hi *= 2.0;
    l_hi = lam(a_hi);
  }
  auto f = [&](double a) { return lam(a) - lambda; };
  const double alpha = roots::refine(f, {a_lo, a_hi, l_lo - lambda, l_hi - lambda}, 1e-15);
  auto pt = solve_at_alpha(prior, alpha, shape);
  if (std::abs(pt.lambda - lambda) > kEquationTol * std::max(1.0, lambda)) {
    throw convergence_error("lambda inversion left residual " +
                            std::to_string(pt.lambda - lambda));
  }
  return pt;
}

/// Asymptotic (tpp, fdp) at threshold alpha.
inline TradeoffPoint tradeoff_point(const DiscretePrior& prior, double alpha,
                                    const ModelShape& shape) {
  const auto se = solve_at_alpha(prior, alpha, shape);
  const double u = detail::true_positive_prob(prior, alpha, se.tau);
  return {alpha, se.tau, se.lambda, u, detail::fdp_from(prior.epsilon(), alpha, u)};
}

/// Power at the lower end of the admissible alpha range. With noise, power
/// can dip near that end, so this bounds the curve's monotone branch only.
inline double tpp_supremum(const DiscretePrior& prior, const ModelShape& shape) {
  const double floor = alpha_lambda_floor(prior, shape);
  return tradeoff_point(prior, floor + 1e-9 * std::max(1.0, floor), shape).tpp;
}

namespace detail {

inline double alpha_for_tpp(const DiscretePrior& prior, double u, const ModelShape& shape,
                            double a_lo, double u_lo, double a_hi, double u_hi) {
  auto f = [&](double a) { return tradeoff_point(prior, a, shape).tpp - u; };
  return roots::refine(f, {a_lo, a_hi, u_lo - u, u_hi - u}, 1e-15);
}

}  // namespace detail

/// The point on the prior's trade-off curve with tpp = u.
inline TradeoffPoint tradeoff_at_tpp(const DiscretePrior& prior, double u,
                                     const ModelShape& shape) {
  detail::check_consistent(prior, shape);
  if (!(u > 0.0 && u < 1.0)) throw input_error("target tpp must lie in (0, 1)");
  const double floor = alpha_lambda_floor(prior, shape);
  const double a_lo = floor + 1e-9 * std::max(1.0, floor);
  const double u_lo = tradeoff_point(prior, a_lo, shape).tpp;
  if (u >= u_lo) {
    throw range_error("tpp = " + std::to_string(u) + " is not achievable; supremum is " +
                          std::to_string(u_lo),
                      0.0, u_lo);
  }
  double a_hi = std::max(2.0 * a_lo, 1.0);
  double u_hi = tradeoff_point(prior, a_hi, shape).tpp;
  double a_prev = a_lo;
  double u_prev = u_lo;
  while (u_hi > u) {
    if (a_hi > 1e6) throw range_error("tpp target too small to bracket", 0.0, u_lo);
    a_prev = a_hi;
    u_prev = u_hi;
    a_hi *= 2.0;
    u_hi = tradeoff_point(prior, a_hi, shape).tpp;
  }
  return tradeoff_point(prior, detail::alpha_for_tpp(prior, u, shape, a_prev, u_prev, a_hi, u_hi),
                        shape);
}

/// Samples the prior's trade-off curve at n_points evenly spaced tpp values
/// u_j = s (j + 1) / (n_points + 1), where s = min(1, sup tpp).
inline TradeoffCurve tradeoff_curve(const DiscretePrior& prior, const ModelShape& shape,
                                    int n_points) {
  detail::check_consistent(prior, shape);
  if (n_points < 2) throw input_error("n_points must be at least 2");
  const double floor = alpha_lambda_floor(prior, shape);
  const double a_lo = floor + 1e-9 * std::max(1.0, floor);
  const double u_sup = tradeoff_point(prior, a_lo, shape).tpp;
  const double scale = u_sup >= 1.0 - 1e-9 ? 1.0 : u_sup;

  std::vector<double> targets(static_cast<std::size_t>(n_points));
  for (int j = 0; j < n_points; ++j) targets[j] = scale * (j + 1.0) / (n_points + 1.0);

  // Coarse sweep in alpha (geometric in alpha - floor) to bracket each target.
  std::vector<double> sweep_a{a_lo};
  std::vector<double> sweep_u{u_sup};
  const double u_min = targets.front();
  double step = 1e-6 * std::max(1.0, floor);
  while (sweep_u.back() > u_min) {
    step *= 1.6;
    const double a = floor + step;
    if (a > 1e6) throw convergence_error("could not reach the smallest tpp target");
    sweep_a.push_back(a);
    sweep_u.push_back(tradeoff_point(prior, a, shape).tpp);
  }

  TradeoffCurve curve;
  curve.kind = CurveKind::prior_specific;
  curve.points.reserve(targets.size());
  for (double u : targets) {
    if (u >= u_sup) {
      throw range_error("tpp grid exceeds achievable supremum", 0.0, u_sup);
    }
    // sweep_u is decreasing; find consecutive pair with sweep_u[i] >= u > sweep_u[i+1].
    std::size_t i = 0;
    while (i + 1 < sweep_u.size() && sweep_u[i + 1] > u) ++i;
    const double a = detail::alpha_for_tpp(prior, u, shape, sweep_a[i], sweep_u[i],
                                           sweep_a[i + 1], sweep_u[i + 1]);
    curve.points.push_back(tradeoff_point(prior, a, shape));
  }
  return curve;
}

}  // namespace crescent
