#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "crescent/errors.hpp"

namespace crescent {

/// Limiting shape of the regression problem: delta = n/p, epsilon = k/p,
/// sigma = noise level.
struct ModelShape {
  double delta = 1.0;
  double epsilon = 0.2;
  double sigma = 0.0;

  void validate() const {
    if (!(delta > 0.0) || !std::isfinite(delta)) {
      throw input_error("delta must be positive and finite");
    }
    if (!(epsilon > 0.0 && epsilon < 1.0)) {
      throw input_error("epsilon must lie in (0, 1)");
    }
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
      throw input_error("sigma must be nonnegative and finite");
    }
  }
};

struct Atom {
  double value;
  double probability;
};

/// An epsilon-sparse effect-size distribution with finitely many nonzero
/// atoms. Probabilities are absolute, so they sum to epsilon and the
/// remaining 1 - epsilon sits at zero.
class DiscretePrior {
 public:
  explicit DiscretePrior(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
    if (atoms_.empty()) {
      throw input_error("prior needs at least one nonzero atom (epsilon must be > 0)");
    }
    double total = 0.0;
    for (const auto& a : atoms_) {
      if (!std::isfinite(a.value) || a.value == 0.0) {
        throw input_error("prior atoms must be finite and nonzero");
      }
      if (!(a.probability > 0.0) || !std::isfinite(a.probability)) {
        throw input_error("prior atom probabilities must be positive");
      }
      total += a.probability;
    }
    if (!(total < 1.0 + 1e-12)) {
      throw input_error("prior atom probabilities must sum to less than one");
    }
    if (total >= 1.0) {
      throw input_error("prior must keep positive mass at zero (epsilon < 1)");
    }
    auto sorted = atoms_;
    std::sort(sorted.begin(), sorted.end(),
              [](const Atom& a, const Atom& b) { return a.value < b.value; });
    for (std::size_t i = 1; i < sorted.size(); ++i) {
      if (sorted[i].value == sorted[i - 1].value) {
        throw input_error("prior atom values must be distinct");
      }
    }
    epsilon_ = total;
  }

  /// Point mass M with probability epsilon.
  static DiscretePrior homogeneous(double epsilon, double magnitude) {
    return DiscretePrior({{magnitude, epsilon}});
  }

  /// Atoms M, M^2, ..., M^m, each with probability epsilon / m.
  static DiscretePrior heterogeneous(double epsilon, int m, double magnitude) {
    if (m < 1) throw input_error("heterogeneous prior needs m >= 1");
    std::vector<double> weights(static_cast<std::size_t>(m), 1.0 / m);
    std::vector<double> levels;
    levels.reserve(weights.size());
    for (int i = 1; i <= m; ++i) levels.push_back(std::pow(magnitude, i));
    return with_levels(epsilon, weights, levels);
  }

  /// Atoms `levels[i]` with probability epsilon * gamma[i]; gamma must sum to one.
  static DiscretePrior with_levels(double epsilon, std::span<const double> gamma,
                                   std::span<const double> levels) {
    if (gamma.size() != levels.size() || gamma.empty()) {
      throw input_error("gamma and levels must be nonempty and of equal length");
    }
    if (!(epsilon > 0.0 && epsilon < 1.0)) {
      throw input_error("epsilon must lie in (0, 1)");
    }
    double sum = 0.0;
    for (double g : gamma) sum += g;
    if (std::abs(sum - 1.0) > 1e-9) throw input_error("gamma must sum to one");
    std::vector<Atom> atoms;
    atoms.reserve(gamma.size());
    for (std::size_t i = 0; i < gamma.size(); ++i) {
      if (!std::isfinite(levels[i])) {
        throw input_error("prior level " + std::to_string(i) + " is not representable");
      }
      atoms.push_back({levels[i], epsilon * gamma[i] / sum});
    }
    return DiscretePrior(std::move(atoms));
  }

  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  double epsilon() const noexcept { return epsilon_; }
  double null_mass() const noexcept { return 1.0 - epsilon_; }

  double second_moment() const noexcept {
    double m2 = 0.0;
    for (const auto& a : atoms_) m2 += a.probability * a.value * a.value;
    return m2;
  }

  double max_abs() const noexcept {
    double m = 0.0;
    for (const auto& a : atoms_) m = std::max(m, std::abs(a.value));
    return m;
  }

 private:
  std::vector<Atom> atoms_;
  double epsilon_ = 0.0;
};

}  // namespace crescent
