#pragma once

// Test-only cyclic coordinate descent for 0.5 ||y - X b||^2 + lambda ||b||_1,
// stopped on the duality gap relative to the primal value.

#include <cmath>

#include <Eigen/Dense>

namespace oracle {

inline Eigen::VectorXd cd_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                                double gap_tol = 1e-20, int max_sweeps = 200000) {
  const Eigen::Index p = X.cols();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd r = y;
  const Eigen::VectorXd sq = X.colwise().squaredNorm().transpose();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    for (Eigen::Index j = 0; j < p; ++j) {
      const double z = b[j] + X.col(j).dot(r) / sq[j];
      const double c = lambda / sq[j];
      const double nb = z > c ? z - c : (z < -c ? z + c : 0.0);
      if (nb != b[j]) {
        r -= (nb - b[j]) * X.col(j);
        b[j] = nb;
      }
    }
    const double primal = 0.5 * r.squaredNorm() + lambda * b.lpNorm<1>();
    const double scale = std::min(1.0, lambda / (X.transpose() * r).lpNorm<Eigen::Infinity>());
    const Eigen::VectorXd theta = scale * r;
    const double dual = 0.5 * y.squaredNorm() - 0.5 * (y - theta).squaredNorm();
    if (primal - dual <= gap_tol * std::max(1.0, primal)) break;
  }
  return b;
}

}  // namespace oracle
