#pragma once

// Exact Lasso solution path  min_b 0.5 ||y - X b||^2 + lambda ||b||_1
// by the LARS-Lasso homotopy: lambda decreases from ||X^T y||_inf and the
// piecewise-linear solution changes direction only when a variable enters
// (its correlation reaches the bound) or leaves (its coefficient hits zero).
// The active Gram matrix is kept as an upper Cholesky factor updated by
// one column on entry and by Givens rotations on removal.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "crescent/errors.hpp"

namespace crescent {

using DesignMatrix = Eigen::MatrixXd;
using Index = Eigen::Index;

enum class EventKind { add, drop };
enum class StopReason { lambda_floor, max_active, full_path, early_stop };

inline const char* to_string(EventKind k) { return k == EventKind::add ? "add" : "drop"; }

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::lambda_floor: return "lambda_floor";
    case StopReason::max_active: return "max_active";
    case StopReason::full_path: return "full_path";
    case StopReason::early_stop: return "early_stop";
  }
  return "unknown";
}

struct PathEvent {
  double lambda = 0.0;
  EventKind kind = EventKind::add;
  Index variable = -1;
  /// Active set after the event, in entry order.
  std::vector<Index> active_set;
  /// Coefficients of `active_set` at the breakpoint.
  Eigen::VectorXd coefficients;
  /// Rate of change of the active coefficients per unit decrease of lambda,
  /// valid until the next event.
  Eigen::VectorXd coef_direction;
};

struct LassoPath {
  std::vector<PathEvent> events;
  Index n = 0;
  Index p = 0;
  double lambda_max = 0.0;
  /// Smallest lambda at which the path is valid.
  double lambda_end = 0.0;
  double y_norm = 0.0;
  StopReason stopping_reason = StopReason::full_path;
};

struct PathOptions {
  /// Stop once lambda reaches this value; negative means 1e-10 * lambda_max.
  double lambda_floor = -1.0;
  /// Stop once this many variables are active; negative means
  /// max(1, min(n - 1, p)). At most min(n, p).
  Index max_active = -1;
  /// Called after every event; returning true ends the path at that event.
  std::function<bool(const PathEvent&)> stop_after;
};

namespace detail {

// Upper-triangular Cholesky factor R of X_A^T X_A with column add/remove.
class ActiveCholesky {
 public:
  explicit ActiveCholesky(Index capacity) : r_(Eigen::MatrixXd::Zero(capacity, capacity)) {}

  Index size() const noexcept { return m_; }

  // Appends a column whose Gram entries against the current active set are
  // `cross` and whose squared norm is `diag`. Returns false if the new
  // column is numerically dependent.
  bool append(const Eigen::Ref<const Eigen::VectorXd>& cross, double diag) {
    if (m_ == r_.cols()) {
      const Index cap = std::max<Index>(2 * r_.cols(), 4);
      Eigen::MatrixXd grown = Eigen::MatrixXd::Zero(cap, cap);
      grown.topLeftCorner(m_, m_) = r_.topLeftCorner(m_, m_);
      r_.swap(grown);
    }
    Eigen::VectorXd w = cross;
    if (m_ > 0) {
      r_.topLeftCorner(m_, m_).triangularView<Eigen::Upper>().transpose().solveInPlace(w);
    }
    const double rr = diag - w.squaredNorm();
    if (!(rr > 1e-10 * diag)) return false;
    r_.col(m_).head(m_) = w;
    r_(m_, m_) = std::sqrt(rr);
    ++m_;
    return true;
  }

  // Removes column k and restores triangularity with Givens rotations.
  void remove(Index k) {
    for (Index j = k; j + 1 < m_; ++j) r_.col(j).head(m_) = r_.col(j + 1).head(m_);
    r_.col(m_ - 1).setZero();
    for (Index i = k; i + 1 < m_; ++i) {
      Eigen::JacobiRotation<double> g;
      g.makeGivens(r_(i, i), r_(i + 1, i));
      r_.block(0, i, m_, m_ - 1 - i).applyOnTheLeft(i, i + 1, g.adjoint());
      r_(i + 1, i) = 0.0;
    }
    r_.row(m_ - 1).setZero();
    --m_;
  }

  // Solves (R^T R) x = b.
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    Eigen::VectorXd x = b;
    const auto R = r_.topLeftCorner(m_, m_).triangularView<Eigen::Upper>();
    R.transpose().solveInPlace(x);
    R.solveInPlace(x);
    return x;
  }

 private:
  Eigen::MatrixXd r_;
  Index m_ = 0;
};

inline void check_path_inputs(const DesignMatrix& X, const Eigen::VectorXd& y) {
  if (X.rows() < 1 || X.cols() < 1) throw input_error("design must have n >= 1 and p >= 1");
  if (y.size() != X.rows()) {
    throw input_error("response length " + std::to_string(y.size()) +
                      " does not match design rows " + std::to_string(X.rows()));
  }
  if (!X.allFinite() || !y.allFinite()) throw input_error("design and response must be finite");
}

}  // namespace detail

/// X^T (y - X beta).
inline Eigen::VectorXd residual_correlations(const DesignMatrix& X, const Eigen::VectorXd& y,
                                             const Eigen::VectorXd& beta) {
  detail::check_path_inputs(X, y);
  if (beta.size() != X.cols()) throw input_error("coefficient length does not match design");
  return X.transpose() * (y - X * beta);
}

/// Largest KKT violation of beta at lambda, relative to lambda:
/// active coordinates need X_j^T r = lambda sign(beta_j), inactive ones
/// |X_j^T r| <= lambda.
inline double kkt_violation(const DesignMatrix& X, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& beta, double lambda) {
  const Eigen::VectorXd c = residual_correlations(X, y, beta);
  double worst = 0.0;
  for (Index j = 0; j < c.size(); ++j) {
    const double v = beta[j] != 0.0 ? std::abs(c[j] - lambda * (beta[j] > 0 ? 1.0 : -1.0))
                                    : std::max(0.0, std::abs(c[j]) - lambda);
    worst = std::max(worst, v);
  }
  return worst / std::max(lambda, std::numeric_limits<double>::min());
}

/// Computes the Lasso path from lambda_max = ||X^T y||_inf down to the
/// stopping condition.
inline LassoPath lasso_path(const DesignMatrix& X, const Eigen::VectorXd& y,
                            const PathOptions& opts = {}) {
  detail::check_path_inputs(X, y);
  const Index n = X.rows();
  const Index p = X.cols();
  const Eigen::VectorXd col_sq = X.colwise().squaredNorm().transpose();
  for (Index j = 0; j < p; ++j) {
    if (!(col_sq[j] > 0.0)) {
      throw input_error("design column " + std::to_string(j) + " is identically zero");
    }
  }
  const Index max_active =
      opts.max_active < 0 ? std::max<Index>(1, std::min(n - 1, p)) : opts.max_active;
  if (max_active > std::min(n, p)) throw input_error("max_active exceeds min(n, p)");

  LassoPath path;
  path.n = n;
  path.p = p;
  path.y_norm = y.norm();

  Eigen::VectorXd c = X.transpose() * y;
  Index first = 0;
  const double lambda_max = c.cwiseAbs().maxCoeff(&first);
  path.lambda_max = lambda_max;
  path.lambda_end = lambda_max;
  if (lambda_max == 0.0 || max_active == 0) {
    path.stopping_reason = StopReason::full_path;
    return path;
  }
  const double floor = opts.lambda_floor < 0.0 ? 1e-10 * lambda_max : opts.lambda_floor;
  if (floor >= lambda_max) {
    path.lambda_end = lambda_max;
    path.stopping_reason = StopReason::lambda_floor;
    return path;
  }
  // Lowest index among near-ties for the first entry.
  const double tie = 1e-12 * lambda_max;
  for (Index j = 0; j < p; ++j) {
    if (std::abs(c[j]) >= lambda_max - tie) {
      first = j;
      break;
    }
  }

  std::vector<Index> active;
  std::vector<double> sign;
  std::vector<char> is_active(static_cast<std::size_t>(p), 0);
  Eigen::VectorXd beta_active;  // aligned with `active`
  detail::ActiveCholesky chol(std::min<Index>(max_active, 64));
  double lambda = lambda_max;

  auto add_variable = [&](Index j) {
    Eigen::VectorXd cross(static_cast<Index>(active.size()));
    for (std::size_t i = 0; i < active.size(); ++i) cross[i] = X.col(active[i]).dot(X.col(j));
    if (!chol.append(cross, col_sq[j])) {
      throw degenerate_design_error("active Gram matrix became singular when adding variable " +
                                    std::to_string(j) + " at lambda = " + std::to_string(lambda) +
                                    " (step " + std::to_string(path.events.size()) + ")");
    }
    active.push_back(j);
    sign.push_back(c[j] >= 0.0 ? 1.0 : -1.0);
    is_active[static_cast<std::size_t>(j)] = 1;
    beta_active.conservativeResize(static_cast<Index>(active.size()));
    beta_active[beta_active.size() - 1] = 0.0;
  };

  auto record = [&](EventKind kind, Index var) -> PathEvent& {
    PathEvent ev;
    ev.lambda = lambda;
    ev.kind = kind;
    ev.variable = var;
    ev.active_set = active;
    ev.coefficients = beta_active;
    path.events.push_back(std::move(ev));
    return path.events.back();
  };

  add_variable(first);
  record(EventKind::add, first);

  Index just_added = first;
  Index just_dropped = -1;
  double dropped_sign = 0.0;
  Eigen::VectorXd v(n);
  Eigen::VectorXd a(p);
  std::size_t since_refresh = 0;

  for (;;) {
    const Index m = static_cast<Index>(active.size());
    Eigen::VectorXd s(m);
    for (Index i = 0; i < m; ++i) s[i] = sign[static_cast<std::size_t>(i)];
    const Eigen::VectorXd d = chol.solve(s);
    path.events.back().coef_direction = d;

    if (opts.stop_after && opts.stop_after(path.events.back())) {
      path.stopping_reason = StopReason::early_stop;
      break;
    }
    if (m >= max_active) {
      path.stopping_reason = StopReason::max_active;
      break;
    }

    v.setZero();
    for (Index i = 0; i < m; ++i) v.noalias() += d[i] * X.col(active[static_cast<std::size_t>(i)]);
    a.noalias() = X.transpose() * v;

    // Next entry: inactive j whose |c_j - g a_j| reaches lambda - g.
    double g_add = std::numeric_limits<double>::infinity();
    Index j_add = -1;
    for (Index j = 0; j < p; ++j) {
      if (is_active[static_cast<std::size_t>(j)]) continue;
      // A variable that just left sits on its old bound; it may only come
      // back through the opposite one within this segment.
      const bool skip_pos = j == just_dropped && dropped_sign > 0.0;
      const bool skip_neg = j == just_dropped && dropped_sign < 0.0;
      double g = std::numeric_limits<double>::infinity();
      const double den_pos = 1.0 - a[j];
      const double den_neg = 1.0 + a[j];
      if (!skip_pos && den_pos > 1e-14) g = std::min(g, std::max(0.0, (lambda - c[j]) / den_pos));
      if (!skip_neg && den_neg > 1e-14) g = std::min(g, std::max(0.0, (lambda + c[j]) / den_neg));
      if (g < g_add - tie) {
        g_add = g;
        j_add = j;
      }
    }
    // Next removal: active coefficient reaching zero.
    double g_drop = std::numeric_limits<double>::infinity();
    Index k_drop = -1;
    for (Index i = 0; i < m; ++i) {
      const Index var = active[static_cast<std::size_t>(i)];
      if (var == just_added || d[i] == 0.0) continue;
      const double g = -beta_active[i] / d[i];
      if (g > 0.0 && g < g_drop) {
        g_drop = g;
        k_drop = i;
      }
    }

    const double g_floor = lambda - floor;
    const double g_event = std::min(g_add, g_drop);
    if (g_event >= g_floor) {
      beta_active.noalias() += g_floor * d;
      lambda = floor;
      path.stopping_reason =
          std::isfinite(g_event) ? StopReason::lambda_floor : StopReason::full_path;
      break;
    }

    beta_active.noalias() += g_event * d;
    c.noalias() -= g_event * a;
    lambda -= g_event;

    if (++since_refresh == 25) {
      // Refresh correlations from the exact residual to bound drift.
      Eigen::VectorXd r = y;
      for (Index i = 0; i < m; ++i) {
        r.noalias() -= beta_active[i] * X.col(active[static_cast<std::size_t>(i)]);
      }
      c.noalias() = X.transpose() * r;
      since_refresh = 0;
    }

    if (g_drop <= g_add) {
      const Index var = active[static_cast<std::size_t>(k_drop)];
      dropped_sign = sign[static_cast<std::size_t>(k_drop)];
      chol.remove(k_drop);
      active.erase(active.begin() + k_drop);
      sign.erase(sign.begin() + k_drop);
      is_active[static_cast<std::size_t>(var)] = 0;
      Eigen::VectorXd kept(m - 1);
      for (Index i = 0, o = 0; i < m; ++i) {
        if (i != k_drop) kept[o++] = beta_active[i];
      }
      beta_active.swap(kept);
      just_dropped = var;
      just_added = -1;
      record(EventKind::drop, var);
    } else {
      add_variable(j_add);
      just_added = j_add;
      just_dropped = -1;
      record(EventKind::add, j_add);
    }
  }
  path.lambda_end = lambda;
  return path;
}

/// Dense coefficient vector at the breakpoint-interpolated lambda.
inline Eigen::VectorXd coefficients_at(const LassoPath& path, double lambda) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(path.p);
  if (path.events.empty() || lambda >= path.lambda_max) return beta;
  const double tol = 1e-12 * path.lambda_max;
  if (lambda < path.lambda_end - tol) {
    throw range_error("lambda = " + std::to_string(lambda) + " is below the computed path end " +
                          std::to_string(path.lambda_end),
                      path.lambda_end, path.lambda_max);
  }
  // Last event with breakpoint >= lambda.
  auto it = std::partition_point(path.events.begin(), path.events.end(),
                                 [&](const PathEvent& e) { return e.lambda >= lambda; });
  const PathEvent& ev = *std::prev(it);
  const double step = ev.lambda - lambda;
  for (std::size_t i = 0; i < ev.active_set.size(); ++i) {
    const Index ii = static_cast<Index>(i);
    double b = ev.coefficients[ii];
    if (ev.coef_direction.size() == ev.coefficients.size()) b += step * ev.coef_direction[ii];
    beta[ev.active_set[i]] = b;
  }
  return beta;
}

struct TppFdp {
  double lambda;
  double tpp;
  double fdp;
};

namespace detail {

inline std::vector<char> support_mask(Index p, std::span<const Index> true_support) {
  std::vector<char> mask(static_cast<std::size_t>(p), 0);
  for (Index j : true_support) {
    if (j < 0 || j >= p) {
      throw input_error("true support index " + std::to_string(j) + " out of range [0, " +
                        std::to_string(p) + ")");
    }
    mask[static_cast<std::size_t>(j)] = 1;
  }
  return mask;
}

}  // namespace detail

/// TPP and FDP of the support on the segment just below each breakpoint.
/// FDP of an empty selection is 0; TPP divides by max(k, 1).
inline std::vector<TppFdp> tpp_fdp_along_path(const LassoPath& path,
                                              std::span<const Index> true_support) {
  const auto mask = detail::support_mask(path.p, true_support);
  const Index k = static_cast<Index>(std::count(mask.begin(), mask.end(), 1));
  std::vector<TppFdp> out;
  out.reserve(path.events.size());
  for (const auto& ev : path.events) {
    Index tp = 0;
    for (Index j : ev.active_set) tp += mask[static_cast<std::size_t>(j)];
    const Index sel = static_cast<Index>(ev.active_set.size());
    const double tpp = static_cast<double>(tp) / static_cast<double>(std::max<Index>(k, 1));
    const double fdp = sel == 0 ? 0.0 : static_cast<double>(sel - tp) / static_cast<double>(sel);
    out.push_back({ev.lambda, tpp, fdp});
  }
  return out;
}

struct FirstFalseRank {
  Index rank = 0;
  /// No null variable entered before the path stopped; rank is then k + 1.
  bool censored = false;
};

/// One plus the number of true variables selected when the first null
/// variable enters the path.
inline FirstFalseRank first_false_rank(const LassoPath& path, std::span<const Index> true_support) {
  const auto mask = detail::support_mask(path.p, true_support);
  const Index k = static_cast<Index>(std::count(mask.begin(), mask.end(), 1));
  std::size_t before = 0;  // active-set size just before the current event
  for (std::size_t e = 0; e < path.events.size(); ++e) {
    const auto& ev = path.events[e];
    if (ev.kind == EventKind::add && !mask[static_cast<std::size_t>(ev.variable)]) {
      return {static_cast<Index>(before) + 1, false};
    }
    before = ev.active_set.size();
  }
  return {k + 1, true};
}

/// Path option that ends the path at the first null-variable entry.
inline std::function<bool(const PathEvent&)> stop_at_first_false(std::vector<char> support_mask) {
  return [mask = std::move(support_mask)](const PathEvent& ev) {
    return ev.kind == EventKind::add && !mask[static_cast<std::size_t>(ev.variable)];
  };
}

}  // namespace crescent
