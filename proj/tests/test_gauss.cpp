#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>
#include <boost/math/distributions/normal.hpp>

#include "crescent/gauss.hpp"
#include "quadrature.hpp"

using namespace crescent;

TEST(NormalPdf, ValueAtZero) { EXPECT_NEAR(normal_pdf(0.0), 0.398942280401432678, 1e-16); }

TEST(NormalPdf, Symmetric) {
  for (double x : {0.1, 1.0, 3.7, 12.0}) EXPECT_EQ(normal_pdf(x), normal_pdf(-x));
}

TEST(NormalPdf, MatchesQuadratureNormalizedDensity) {
  const double mass = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [](double w) { return std::exp(-0.5 * w * w); }, -12.0, 12.0, 20, 1e-15);
  EXPECT_NEAR(normal_pdf(1.0), std::exp(-0.5) / mass, 1e-15);
}

TEST(NormalPdf, RejectsNonFinite) {
  EXPECT_THROW(normal_pdf(std::numeric_limits<double>::quiet_NaN()), input_error);
  EXPECT_THROW(normal_pdf(std::numeric_limits<double>::infinity()), input_error);
}

TEST(NormalCdf, Basics) {
  EXPECT_EQ(normal_cdf(0.0), 0.5);
  EXPECT_NEAR(normal_cdf(-8.0), 6.22096057427178e-16, 1e-28);
  EXPECT_NEAR(normal_cdf(8.0), 1.0 - normal_cdf(-8.0), 1e-16);
}

TEST(NormalCdf, QuantileOracle) {
  const double q = boost::math::quantile(boost::math::normal_distribution<double>(), 0.025);
  EXPECT_NEAR(normal_cdf(q), 0.025, 1e-15);
  EXPECT_NEAR(normal_cdf(-1.959963985), 0.025, 1e-10);
}

TEST(NormalCdf, RelativeAccuracyOnCentralRange) {
  for (int i = -800; i <= 800; ++i) {
    const double x = i / 100.0;
    const double ref = oracle::cdf(x);
    EXPECT_LE(std::abs(normal_cdf(x) - ref), 5e-14 * ref) << "x = " << x;
    EXPECT_NEAR(normal_cdf(x) + normal_cdf(-x), 1.0, 2e-16);
  }
}

TEST(NormalCdf, RejectsNonFinite) {
  EXPECT_THROW(normal_cdf(std::numeric_limits<double>::quiet_NaN()), input_error);
}

TEST(SoftThreshold, Examples) {
  EXPECT_EQ(soft_threshold(3.0, 1.0), 2.0);
  EXPECT_EQ(soft_threshold(-0.5, 1.0), 0.0);
  EXPECT_EQ(soft_threshold(-3.0, 1.0), -2.0);
  EXPECT_THROW(soft_threshold(1.0, -0.1), input_error);
}

TEST(ExcessProb, Examples) {
  EXPECT_EQ(excess_prob(0.0, 0.0), 1.0);
  for (double a : {0.3, 1.0, 4.0}) EXPECT_NEAR(excess_prob(0.0, a), 2.0 * normal_cdf(-a), 1e-16);
  EXPECT_THROW(excess_prob(0.0, -1.0), input_error);
}

TEST(ExcessProb, MonteCarlo) {
  std::mt19937_64 gen(20240601);
  std::normal_distribution<double> w(0.0, 1.0);
  const int n = 10'000'000;
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += std::abs(2.0 + w(gen)) > 1.0 ? 1 : 0;
  const double p = excess_prob(2.0, 1.0);
  const double se = std::sqrt(p * (1.0 - p) / n);
  EXPECT_NEAR(static_cast<double>(hits) / n, p, 3.0 * se);
}

TEST(MseNull, Examples) {
  EXPECT_NEAR(mse_null(0.0), 1.0, 1e-15);
  EXPECT_LT(mse_null(20.0), 1e-80);
  EXPECT_GE(mse_null(20.0), 0.0);
  EXPECT_NEAR(mse_null(1.0), oracle::mse_null(1.0), 1e-8);
  EXPECT_THROW(mse_null(-0.5), input_error);
}

TEST(MseSignal, Examples) {
  for (double a : {0.0, 0.5, 2.0, 7.0}) EXPECT_NEAR(mse_signal(0.0, a), mse_null(a), 1e-15);
  EXPECT_NEAR(mse_signal(50.0, 1.0), 2.0, 1e-6);
  EXPECT_NEAR(mse_signal(2.0, 1.0), oracle::mse_signal(2.0, 1.0), 1e-8);
  EXPECT_THROW(mse_signal(1.0, -1.0), input_error);
}

TEST(MseSignal, MatchesPrintedClosedForm) {
  for (double t = -6.0; t <= 6.0; t += 0.25) {
    for (double a = 0.0; a <= 6.0; a += 0.25) {
      EXPECT_NEAR(mse_signal(t, a), oracle::mse_signal_closed(t, a), 1e-13) << t << " " << a;
    }
  }
}

TEST(MseSignal, TailSafeForLargeArguments) {
  // Far-tail regime where the printed form cancels; values must stay sane.
  for (double t : {100.0, 1e3, 1e8, 1e150}) {
    for (double a : {0.0, 1.0, 30.0, 60.0}) {
      const double v = mse_signal(t, a);
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_NEAR(v, 1.0 + a * a, 1e-9 * (1.0 + a * a)) << t << " " << a;
    }
  }
  EXPECT_GT(mse_signal(0.0, 30.0), 0.0);
  EXPECT_NEAR(mse_signal(40.0, 60.0), 1600.0, 1e-9);
}

// Property suite over grids.

TEST(GaussProperties, ExcessProbEvenInT) {
  for (int i = 0; i < 100; ++i) {
    for (int j = 0; j < 100; ++j) {
      const double t = -10.0 + 20.0 * i / 99.0;
      const double a = 10.0 * j / 99.0;
      EXPECT_EQ(excess_prob(t, a), excess_prob(-t, a));
    }
  }
}

TEST(GaussProperties, ExcessProbDecreasingInAlpha) {
  const double h = 1e-6;
  for (double t = -10.0; t <= 10.0; t += 0.5) {
    for (double a = 0.01; a <= 10.0; a += 0.37) {
      const double d = excess_prob(t, a + h) - excess_prob(t, a - h);
      // The difference is lost to rounding when the slope is tiny.
      if (2.0 * h * (normal_pdf(a - t) + normal_pdf(a + t)) > 1e-13) {
        EXPECT_LT(d, 0.0) << t << " " << a;
      } else {
        EXPECT_LE(d, 0.0) << t << " " << a;
      }
    }
  }
}

TEST(GaussProperties, RangesAndMonotonicity) {
  double prev_null = 2.0;
  for (double a = 0.0; a <= 12.0; a += 0.1) {
    const double m = mse_null(a);
    EXPECT_GT(m, 0.0);
    EXPECT_LE(m, 1.0);
    EXPECT_LT(m, prev_null);
    prev_null = m;
    double prev = -1.0;
    for (double t = 0.0; t <= 15.0; t += 0.1) {
      const double p = excess_prob(t, a);
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, 1.0);
      EXPECT_GE(p, prev);
      prev = p;
      EXPECT_GE(mse_signal(t, a), 0.0);
      EXPECT_EQ(mse_signal(t, a), mse_signal(-t, a));
    }
  }
}

TEST(GaussProperties, AgreesWithQuadratureOracle) {
  for (int i = 0; i < 15; ++i) {
    for (int j = 0; j < 15; ++j) {
      const double t = -8.0 + 16.0 * i / 14.0;
      const double a = 6.0 * j / 14.0;
      EXPECT_NEAR(excess_prob(t, a), oracle::excess_prob(t, a), 1e-8);
      EXPECT_NEAR(mse_signal(t, a), oracle::mse_signal(t, a), 1e-8);
    }
  }
}

TEST(GaussProperties, RiskCurveConcaveInPower) {
  for (double a : {0.5, 1.0, 2.0}) {
    const int n = 1000;
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      const double t = 8.0 * i / (n - 1);
      x[i] = excess_prob(t, a);
      y[i] = mse_signal(t, a);
    }
    for (int i = 1; i + 1 < n; ++i) {
      if (!(x[i + 1] > x[i] && x[i] > x[i - 1]) || x[i + 1] - x[i - 1] < 1e-6) continue;
      const double s1 = (y[i] - y[i - 1]) / (x[i] - x[i - 1]);
      const double s2 = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
      EXPECT_LE((s2 - s1) / (x[i + 1] - x[i - 1]), 1e-6 * (1.0 + std::abs(s1))) << a << " " << i;
    }
  }
}
