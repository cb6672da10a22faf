#pragma once

// Test-only reference values: adaptive Gauss-Kronrod over [-12, 12], split
// at the kinks of the soft threshold.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace oracle {

inline constexpr double kLimit = 12.0;

inline double pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }
inline double cdf(double x) { return boost::math::cdf(boost::math::normal_distribution<double>(), x); }

inline double soft(double x, double c) {
  if (x > c) return x - c;
  if (x < -c) return x + c;
  return 0.0;
}

// Integral of f(w) phi(w) over [-12, 12] with breakpoints.
template <class F>
double gaussian_expectation(F f, std::vector<double> breaks) {
  breaks.push_back(-kLimit);
  breaks.push_back(kLimit);
  std::sort(breaks.begin(), breaks.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double a = std::clamp(breaks[i], -kLimit, kLimit);
    const double b = std::clamp(breaks[i + 1], -kLimit, kLimit);
    if (!(b > a)) continue;
    double err = 0.0;
    total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        [&](double w) { return f(w) * pdf(w); }, a, b, 12, 1e-12, &err);
    if (err > 1e-10) throw std::runtime_error("quadrature oracle missed its tolerance");
  }
  return total;
}

inline double excess_prob(double t, double alpha) {
  return gaussian_expectation([&](double w) { return std::abs(t + w) > alpha ? 1.0 : 0.0; },
                              {alpha - t, -alpha - t});
}

inline double mse_null(double alpha) {
  return gaussian_expectation([&](double w) { return std::pow(soft(w, alpha), 2); }, {alpha, -alpha});
}

inline double mse_signal(double t, double alpha) {
  return gaussian_expectation([&](double w) { return std::pow(soft(t + w, alpha) - t, 2); },
                              {alpha - t, -alpha - t});
}

// Closed form for E(eta_a(t + W) - t)^2 as printed, with Boost's normal CDF.
inline double mse_signal_closed(double t, double a) {
  return -(a + t) * pdf(a - t) - (a - t) * pdf(a + t) + (1 + a * a) * (cdf(-a + t) + cdf(-a - t)) +
         t * t * (cdf(a - t) - cdf(-a - t));
}

inline double mse_null_closed(double a) { return 2.0 * ((1 + a * a) * cdf(-a) - a * pdf(a)); }

}  // namespace oracle
