#pragma once

// Standard normal special functions and closed-form Gaussian expectations
// of the soft-thresholding denoiser. All functions are pure and reentrant.

#include <cmath>
#include <numbers>
#include <string>

#include "crescent/errors.hpp"

namespace crescent {

namespace detail {

inline void require_finite(double x, const char* who) {
  if (!std::isfinite(x)) {
    throw input_error(std::string(who) + ": argument must be finite");
  }
}

inline void require_threshold(double alpha, const char* who) {
  require_finite(alpha, who);
  if (alpha < 0.0) {
    throw input_error(std::string(who) + ": threshold must be nonnegative");
  }
}

inline double phi(double x) noexcept {
  return std::exp(-0.5 * x * x) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

inline double Phi(double x) noexcept {
  return 0.5 * std::erfc(-x * (0.5 * std::numbers::sqrt2));
}

// Asymptotic series for integral_0^inf s^k exp(-a s - s^2 / 2) ds, k in {1, 2},
// i.e. the tail moments divided by phi(a). Used for a >= 10, where the
// smallest term is below 1e-20 relative.
inline double scaled_tail_moment(int k, double a) noexcept {
  const double inv_a2 = 1.0 / (a * a);
  // j = 0 term: k! / a^(k+1)
  double term = (k == 1 ? 1.0 : 2.0) / std::pow(a, k + 1);
  double sum = term;
  for (int j = 0; j < 200; ++j) {
    // ratio of consecutive terms (-1/2)^j (k+2j)! / (j! a^(k+2j+1))
    const double next =
        -term * (k + 2.0 * j + 1.0) * (k + 2.0 * j + 2.0) * inv_a2 / (2.0 * (j + 1.0));
    if (std::abs(next) >= std::abs(term) || std::abs(next) < 1e-18 * std::abs(sum)) break;
    term = next;
    sum += term;
  }
  return sum;
}

inline constexpr double kSeriesCutoff = 10.0;

// E[(W - a)_+] = phi(a) - a Phi(-a).
inline double first_tail_moment(double a) noexcept {
  if (a < kSeriesCutoff) return phi(a) - a * Phi(-a);
  return phi(a) * scaled_tail_moment(1, a);
}

// E[(W - a)^2; W > a] = (1 + a^2) Phi(-a) - a phi(a).
// The direct form loses about log10(a^4 / 2) digits to cancellation, hence
// the series beyond the cutoff.
inline double upper_second_moment(double a) noexcept {
  if (a < kSeriesCutoff) return (1.0 + a * a) * Phi(-a) - a * phi(a);
  return phi(a) * scaled_tail_moment(2, a);
}

// x * y with 0 * inf treated as 0 (tail probabilities that underflow
// multiply polynomial factors that may overflow).
inline double product_or_zero(double x, double y) noexcept {
  return (x == 0.0 || y == 0.0) ? 0.0 : x * y;
}

// E[(W - b)^2; W > c].
// For c <= 0 the closed form (1 + b^2) Phi(-c) + (c - 2b) phi(c) is well
// conditioned. For c > 0 it is expanded around the cutoff,
// K(c) + 2 (c - b) J1(c) + (c - b)^2 Phi(-c), where every moment is a
// positive upper-tail quantity evaluated without cancellation.
inline double shifted_tail_second_moment(double c, double b) noexcept {
  if (c <= 0.0) {
    return product_or_zero(1.0 + b * b, Phi(-c)) + product_or_zero(c - 2.0 * b, phi(c));
  }
  const double d = c - b;
  const double tail = Phi(-c);
  return upper_second_moment(c) + product_or_zero(2.0 * d, first_tail_moment(c)) +
         product_or_zero(d * d, tail);
}

}  // namespace detail

/// Standard normal density.
inline double normal_pdf(double x) {
  detail::require_finite(x, "normal_pdf");
  return detail::phi(x);
}

/// Standard normal CDF via the complementary error function; relative
/// error stays near machine precision in both tails.
inline double normal_cdf(double x) {
  detail::require_finite(x, "normal_cdf");
  return detail::Phi(x);
}

inline double soft_threshold(double x, double c) {
  detail::require_threshold(c, "soft_threshold");
  if (x > c) return x - c;
  if (x < -c) return x + c;
  return 0.0;
}

/// P(|t + W| > alpha) for W ~ N(0, 1).
inline double excess_prob(double t, double alpha) {
  detail::require_finite(t, "excess_prob");
  detail::require_threshold(alpha, "excess_prob");
  return detail::Phi(t - alpha) + detail::Phi(-t - alpha);
}

/// E[eta_alpha(W)^2] = 2[(1 + alpha^2) Phi(-alpha) - alpha phi(alpha)].
inline double mse_null(double alpha) {
  detail::require_threshold(alpha, "mse_null");
  return 2.0 * detail::upper_second_moment(alpha);
}

/// E[(eta_alpha(t + W) - t)^2].
///
/// Split over the three pieces of the soft threshold:
///   t^2 P(|t + W| <= alpha) + E[(W - alpha)^2; W > alpha - t]
///                           + E[(W - alpha)^2; W > alpha + t],
/// (the last by symmetry of W), each evaluated in a tail-safe ordering.
/// Algebraically identical to the textbook closed form. Even in t.
inline double mse_signal(double t, double alpha) {
  detail::require_finite(t, "mse_signal");
  detail::require_threshold(alpha, "mse_signal");
  const double s = std::abs(t);
  // Difference of two upper tails; both small when s is large.
  const double inside = detail::Phi(alpha - s) - detail::Phi(-alpha - s);
  return detail::product_or_zero(s * s, inside) +
         detail::shifted_tail_second_moment(alpha - s, alpha) +
         detail::shifted_tail_second_moment(alpha + s, alpha);
}

}  // namespace crescent
