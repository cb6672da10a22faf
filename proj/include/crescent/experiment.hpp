#pragma once

// Seeded Monte Carlo replication of Lasso paths on random designs, with
// aggregation into TPP-FDP trade-off tables and first-false-rank tables.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "crescent/errors.hpp"
#include "crescent/io.hpp"
#include "crescent/lasso_path.hpp"
#include "crescent/prior.hpp"
#include "crescent/rng.hpp"

namespace crescent {

enum class DesignKind { iid_gaussian, correlated_gaussian, bernoulli_pm, genotype_file, matrix_file };
enum class CorrelationStructure { toeplitz, equicorrelation };

struct DesignSpec {
  DesignKind kind = DesignKind::iid_gaussian;
  Index n = 1000;
  Index p = 1000;
  /// Correlated designs: Sigma = variance * C with C Toeplitz rho^|i-j| or
  /// equicorrelated (unit diagonal, rho elsewhere).
  double rho = 0.0;
  CorrelationStructure structure = CorrelationStructure::toeplitz;
  /// Entry variance; nonpositive means 1/n.
  double variance = -1.0;
  /// File-backed designs.
  std::string path;
  /// Standard deviation of the Gaussian jitter added to genotype entries;
  /// negative means 1/sqrt(n).
  double jitter_sd = -1.0;

  double entry_variance() const { return variance > 0.0 ? variance : 1.0 / static_cast<double>(n); }
};

enum class CoefficientKind { prior_sample, fixed_levels, geometric, linear, equal, decreasing, explicit_values };

struct CoefficientSpec {
  CoefficientKind kind = CoefficientKind::equal;
  Index p = 1000;
  /// Sparsity for geometric, linear, equal, decreasing.
  Index k = 200;
  /// Magnitude for geometric (ratio), equal (value), decreasing (first value).
  double magnitude = 100.0;
  std::optional<DiscretePrior> prior;
  /// fixed_levels: values[i] repeated counts[i] times. explicit_values: the
  /// full leading block of beta.
  std::vector<double> values;
  std::vector<Index> counts;
};

enum class ExperimentMode { tradeoff, rank };
enum class SweepParameter { none, k, rho };

struct ExperimentConfig {
  DesignSpec design;
  CoefficientSpec coefficients;
  double sigma = 0.0;
  int replicates = 20;
  std::uint64_t seed = 1;
  ExperimentMode mode = ExperimentMode::tradeoff;
  std::vector<double> tpp_grid;
  SweepParameter sweep = SweepParameter::none;
  std::vector<double> sweep_values;
  /// Negative means the path default, max(1, min(n - 1, p)).
  Index max_active = -1;
  /// Worker threads; nonpositive means hardware concurrency.
  int jobs = 1;
  double max_failure_fraction = 0.1;
};

inline std::vector<double> uniform_tpp_grid(int points) {
  if (points < 1) throw input_error("tpp grid needs at least one point");
  std::vector<double> g;
  for (int j = 1; j <= points; ++j) g.push_back(static_cast<double>(j) / (points + 1));
  return g;
}

inline void validate(const DesignSpec& d) {
  const bool from_file = d.kind == DesignKind::genotype_file || d.kind == DesignKind::matrix_file;
  if (from_file) {
    if (d.path.empty()) throw input_error("design.path is required for file-backed designs");
    return;
  }
  if (d.n < 1 || d.p < 1) throw input_error("design.n and design.p must be positive");
  if (!std::isfinite(d.variance)) throw input_error("design.variance must be finite");
  if (d.kind == DesignKind::correlated_gaussian) {
    if (!(std::abs(d.rho) < 1.0)) throw input_error("design.rho must lie in (-1, 1)");
  }
}

inline void validate(const CoefficientSpec& c) {
  if (c.p < 1) throw input_error("coefficients.p must be positive");
  switch (c.kind) {
    case CoefficientKind::prior_sample:
      if (!c.prior) throw input_error("coefficients.prior is required for prior_sample");
      break;
    case CoefficientKind::fixed_levels: {
      if (c.values.size() != c.counts.size() || c.values.empty()) {
        throw input_error("coefficients.values and coefficients.counts must be nonempty and of equal length");
      }
      Index total = 0;
      for (std::size_t i = 0; i < c.values.size(); ++i) {
        if (c.counts[i] < 0) throw input_error("coefficients.counts must be nonnegative");
        if (!std::isfinite(c.values[i]) || c.values[i] == 0.0) {
          throw input_error("coefficients.values must be finite and nonzero");
        }
        total += c.counts[i];
      }
      if (total > c.p) throw input_error("coefficients: total nonzeros exceed p");
      break;
    }
    case CoefficientKind::explicit_values:
      if (static_cast<Index>(c.values.size()) > c.p) {
        throw input_error("coefficients.values longer than p");
      }
      for (double v : c.values) {
        if (!std::isfinite(v)) throw input_error("coefficients.values must be finite");
      }
      break;
    case CoefficientKind::geometric:
    case CoefficientKind::linear:
    case CoefficientKind::equal:
    case CoefficientKind::decreasing:
      if (c.k < 0 || c.k > c.p) throw input_error("coefficients.k must lie in [0, p]");
      if (c.kind != CoefficientKind::linear &&
          (!std::isfinite(c.magnitude) || c.magnitude == 0.0)) {
        throw input_error("coefficients.magnitude must be finite and nonzero");
      }
      if (c.kind == CoefficientKind::geometric) {
        const double top = static_cast<double>(c.k) * std::log10(std::abs(c.magnitude));
        if (!(top < 300.0)) {
          throw input_error("geometric coefficients: |M|^k must stay below 1e300 (log10 = " +
                            std::to_string(top) + ")");
        }
      }
      break;
  }
}

inline void validate(const ExperimentConfig& cfg) {
  validate(cfg.design);
  validate(cfg.coefficients);
  if (!(cfg.sigma >= 0.0) || !std::isfinite(cfg.sigma)) {
    throw input_error("sigma must be nonnegative and finite");
  }
  if (cfg.replicates < 1) throw input_error("replicates must be at least 1");
  for (std::size_t i = 0; i < cfg.tpp_grid.size(); ++i) {
    const double u = cfg.tpp_grid[i];
    if (!(u >= 0.0 && u <= 1.0)) throw input_error("tpp_grid values must lie in [0, 1]");
    if (i > 0 && !(u > cfg.tpp_grid[i - 1])) {
      throw input_error("tpp_grid must be strictly increasing");
    }
  }
  if (cfg.sweep != SweepParameter::none && cfg.sweep_values.empty()) {
    throw input_error("sweep.values must be nonempty");
  }
  if (!(cfg.max_failure_fraction >= 0.0 && cfg.max_failure_fraction < 1.0)) {
    throw input_error("max_failure_fraction must lie in [0, 1)");
  }
}

/// Draws designs for one spec. File contents and covariance factors are
/// prepared once and shared by all replicates.
class DesignSampler {
 public:
  explicit DesignSampler(DesignSpec spec) : spec_(std::move(spec)) {
    validate(spec_);
    if (spec_.kind == DesignKind::genotype_file || spec_.kind == DesignKind::matrix_file) {
      base_ = std::make_shared<const Eigen::MatrixXd>(io::load_matrix(spec_.path));
      spec_.n = base_->rows();
      spec_.p = base_->cols();
    } else if (spec_.kind == DesignKind::correlated_gaussian) {
      const Index p = spec_.p;
      Eigen::MatrixXd sigma(p, p);
      for (Index i = 0; i < p; ++i) {
        for (Index j = 0; j < p; ++j) {
          if (i == j) {
            sigma(i, j) = 1.0;
          } else if (spec_.structure == CorrelationStructure::toeplitz) {
            sigma(i, j) = std::pow(spec_.rho, static_cast<double>(std::abs(i - j)));
          } else {
            sigma(i, j) = spec_.rho;
          }
        }
      }
      sigma *= spec_.entry_variance();
      Eigen::LLT<Eigen::MatrixXd> llt(sigma);
      if (llt.info() != Eigen::Success) {
        throw input_error("design covariance is not positive definite (rho = " +
                          std::to_string(spec_.rho) + ")");
      }
      factor_ = std::make_shared<const Eigen::MatrixXd>(llt.matrixL());
    }
  }

  const DesignSpec& spec() const noexcept { return spec_; }
  Index rows() const noexcept { return spec_.n; }
  Index cols() const noexcept { return spec_.p; }

  DesignMatrix sample(rng::Engine& gen) const {
    const Index n = spec_.n;
    const Index p = spec_.p;
    std::normal_distribution<double> normal(0.0, 1.0);
    auto gaussian = [&](Index r, Index c) {
      DesignMatrix z(r, c);
      for (Index j = 0; j < c; ++j) {
        for (Index i = 0; i < r; ++i) z(i, j) = normal(gen);
      }
      return z;
    };
    switch (spec_.kind) {
      case DesignKind::iid_gaussian:
        return gaussian(n, p) * std::sqrt(spec_.entry_variance());
      case DesignKind::correlated_gaussian: {
        // Rows z_i^T L^T have covariance L L^T = Sigma.
        const DesignMatrix z = gaussian(n, p);
        return z * factor_->transpose();
      }
      case DesignKind::bernoulli_pm: {
        const double h = std::sqrt(spec_.entry_variance());
        std::bernoulli_distribution coin(0.5);
        DesignMatrix x(n, p);
        for (Index j = 0; j < p; ++j) {
          for (Index i = 0; i < n; ++i) x(i, j) = coin(gen) ? h : -h;
        }
        return x;
      }
      case DesignKind::genotype_file: {
        const double sd = spec_.jitter_sd >= 0.0 ? spec_.jitter_sd
                                                 : 1.0 / std::sqrt(static_cast<double>(n));
        DesignMatrix x = *base_ + gaussian(n, p) * sd;
        for (Index j = 0; j < p; ++j) {
          x.col(j).array() -= x.col(j).mean();
          const double norm = x.col(j).norm();
          if (!(norm > 0.0)) {
            throw input_error("genotype column " + std::to_string(j) + " is constant");
          }
          x.col(j) /= norm;
        }
        return x;
      }
      case DesignKind::matrix_file:
        return *base_;
    }
    throw input_error("unknown design kind");
  }

 private:
  DesignSpec spec_;
  std::shared_ptr<const Eigen::MatrixXd> base_;
  std::shared_ptr<const Eigen::MatrixXd> factor_;
};

inline DesignMatrix sample_design(const DesignSpec& spec, rng::Engine& gen) {
  return DesignSampler(spec).sample(gen);
}

struct Coefficients {
  Eigen::VectorXd beta;
  std::vector<Index> support;
};

inline Coefficients sample_coefficients(const CoefficientSpec& spec, rng::Engine& gen) {
  validate(spec);
  Coefficients out;
  out.beta = Eigen::VectorXd::Zero(spec.p);
  const double k = static_cast<double>(spec.k);
  switch (spec.kind) {
    case CoefficientKind::prior_sample: {
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      const auto& atoms = spec.prior->atoms();
      for (Index j = 0; j < spec.p; ++j) {
        double u = unif(gen);
        for (const auto& a : atoms) {
          if (u < a.probability) {
            out.beta[j] = a.value;
            break;
          }
          u -= a.probability;
        }
      }
      break;
    }
    case CoefficientKind::fixed_levels: {
      Index j = 0;
      for (std::size_t i = 0; i < spec.values.size(); ++i) {
        for (Index c = 0; c < spec.counts[i]; ++c) out.beta[j++] = spec.values[i];
      }
      break;
    }
    case CoefficientKind::geometric:
      // beta_j = M^(k + 1 - j), j = 1..k
      for (Index j = 0; j < spec.k; ++j) {
        out.beta[j] = std::pow(spec.magnitude, static_cast<double>(spec.k - j));
      }
      break;
    case CoefficientKind::linear:
      for (Index j = 0; j < spec.k; ++j) out.beta[j] = static_cast<double>(j + 1);
      break;
    case CoefficientKind::equal:
      for (Index j = 0; j < spec.k; ++j) out.beta[j] = spec.magnitude;
      break;
    case CoefficientKind::decreasing:
      // Evenly spaced from the magnitude down to magnitude / k.
      for (Index j = 0; j < spec.k; ++j) {
        out.beta[j] = spec.magnitude * (k - static_cast<double>(j)) / k;
      }
      break;
    case CoefficientKind::explicit_values:
      for (std::size_t j = 0; j < spec.values.size(); ++j) {
        out.beta[static_cast<Index>(j)] = spec.values[j];
      }
      break;
  }
  for (Index j = 0; j < spec.p; ++j) {
    if (out.beta[j] != 0.0) out.support.push_back(j);
  }
  return out;
}

struct ReplicateResult {
  int replicate_id = 0;
  std::uint64_t seed = 0;
  std::size_t n_events = 0;
  StopReason stopping_reason = StopReason::full_path;
  std::vector<TppFdp> samples;
  std::optional<FirstFalseRank> rank;
  Index n_true = 0;
  bool failed = false;
  std::string error;
};

/// One seeded problem instance: design, coefficients, response.
struct Instance {
  DesignMatrix X;
  Coefficients coefficients;
  Eigen::VectorXd y;
};

inline Instance draw_instance(const DesignSampler& design, const CoefficientSpec& coefficients,
                              double sigma, std::uint64_t seed) {
  if (coefficients.p != design.cols()) {
    throw input_error("coefficients.p = " + std::to_string(coefficients.p) +
                      " does not match the design's p = " + std::to_string(design.cols()));
  }
  Instance inst;
  auto gx = rng::stream(seed, rng::Stream::design);
  inst.X = design.sample(gx);
  auto gb = rng::stream(seed, rng::Stream::coefficients);
  inst.coefficients = sample_coefficients(coefficients, gb);
  inst.y = inst.X * inst.coefficients.beta;
  if (sigma > 0.0) {
    auto gz = rng::stream(seed, rng::Stream::noise);
    std::normal_distribution<double> normal(0.0, sigma);
    for (Index i = 0; i < inst.y.size(); ++i) inst.y[i] += normal(gz);
  }
  return inst;
}

namespace detail {

template <class F>
void parallel_for(int count, int jobs, F&& body) {
  if (jobs <= 0) jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  jobs = std::min(jobs, count);
  if (jobs <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(jobs));
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (int i = next++; i < count; i = next++) body(i);
    });
  }
  for (auto& t : workers) t.join();
}

inline ReplicateResult run_replicate(const ExperimentConfig& cfg, const DesignSampler& design,
                                     const CoefficientSpec& coefficients, std::size_t sweep_index,
                                     int replicate) {
  ReplicateResult r;
  r.replicate_id = replicate;
  r.seed = rng::replicate_seed(cfg.seed, sweep_index, static_cast<std::uint64_t>(replicate));
  try {
    const Instance inst = draw_instance(design, coefficients, cfg.sigma, r.seed);
    const auto& support = inst.coefficients.support;
    r.n_true = static_cast<Index>(support.size());
    PathOptions opts;
    opts.max_active = cfg.max_active;
    std::vector<char> mask(static_cast<std::size_t>(inst.X.cols()), 0);
    for (Index j : support) mask[static_cast<std::size_t>(j)] = 1;
    if (cfg.mode == ExperimentMode::rank) {
      opts.stop_after = stop_at_first_false(std::move(mask));
    } else if (!cfg.tpp_grid.empty() && cfg.tpp_grid.back() < 1.0 && !support.empty()) {
      // Nothing past the first event with TPP above the grid is ever read.
      const double need = cfg.tpp_grid.back() * static_cast<double>(support.size());
      opts.stop_after = [mask = std::move(mask), need](const PathEvent& ev) {
        Index tp = 0;
        for (Index j : ev.active_set) tp += mask[static_cast<std::size_t>(j)];
        return static_cast<double>(tp) > need;
      };
    }
    const LassoPath path = lasso_path(inst.X, inst.y, opts);
    r.n_events = path.events.size();
    r.stopping_reason = path.stopping_reason;
    if (cfg.mode == ExperimentMode::rank) {
      r.rank = first_false_rank(path, support);
    } else {
      r.samples = tpp_fdp_along_path(path, support);
    }
  } catch (const input_error&) {
    throw;
  } catch (const std::exception& e) {
    r.failed = true;
    r.error = e.what();
  }
  return r;
}

inline std::vector<ReplicateResult> run_replicates(const ExperimentConfig& cfg,
                                                   const DesignSampler& design,
                                                   const CoefficientSpec& coefficients,
                                                   std::size_t sweep_index) {
  std::vector<ReplicateResult> results(static_cast<std::size_t>(cfg.replicates));
  std::exception_ptr input_failure;
  std::atomic<bool> stop{false};
  parallel_for(cfg.replicates, cfg.jobs, [&](int i) {
    if (stop) return;
    try {
      results[static_cast<std::size_t>(i)] = run_replicate(cfg, design, coefficients, sweep_index, i);
    } catch (...) {
      if (!stop.exchange(true)) input_failure = std::current_exception();
    }
  });
  if (input_failure) std::rethrow_exception(input_failure);
  int failed = 0;
  std::string first_error;
  for (const auto& r : results) {
    if (r.failed) {
      if (failed == 0) first_error = r.error;
      ++failed;
    }
  }
  if (failed > cfg.max_failure_fraction * cfg.replicates) {
    throw convergence_error(std::to_string(failed) + " of " + std::to_string(cfg.replicates) +
                            " replicates failed; first error: " + first_error);
  }
  return results;
}

}  // namespace detail

/// FDP of a path at TPP level u: the value at the last event before TPP
/// first exceeds u. Empty when the path never reaches u.
inline std::optional<double> fdp_at_tpp(const std::vector<TppFdp>& samples, double u) {
  double fdp = 0.0;  // empty selection above lambda_max
  bool reached = u <= 0.0;
  for (const auto& s : samples) {
    if (s.tpp > u) {
      reached = true;
      break;
    }
    fdp = s.fdp;
    if (s.tpp >= u) reached = true;
  }
  if (!reached) return std::nullopt;
  return fdp;
}

struct TradeoffRow {
  double tpp = 0.0;
  double mean_fdp = 0.0;
  double se_fdp = 0.0;
  int n_ok = 0;
};

struct TradeoffTable {
  std::vector<TradeoffRow> rows;
  std::vector<ReplicateResult> replicates;
  int n_failed = 0;
};

inline TradeoffTable run_tradeoff_experiment(ExperimentConfig cfg) {
  if (cfg.mode != ExperimentMode::tradeoff) throw input_error("config mode must be tradeoff");
  if (cfg.tpp_grid.empty()) cfg.tpp_grid = uniform_tpp_grid(99);
  validate(cfg);
  const DesignSampler design(cfg.design);
  TradeoffTable table;
  table.replicates = detail::run_replicates(cfg, design, cfg.coefficients, 0);
  for (double u : cfg.tpp_grid) {
    TradeoffRow row;
    row.tpp = u;
    double sum = 0.0;
    double sq = 0.0;
    for (const auto& r : table.replicates) {
      if (r.failed) continue;
      const auto f = fdp_at_tpp(r.samples, u);
      if (!f) continue;
      sum += *f;
      sq += *f * *f;
      ++row.n_ok;
    }
    if (row.n_ok > 0) {
      const double m = sum / row.n_ok;
      row.mean_fdp = m;
      if (row.n_ok > 1) {
        const double var = std::max(0.0, (sq - row.n_ok * m * m) / (row.n_ok - 1));
        row.se_fdp = std::sqrt(var / row.n_ok);
      }
    } else {
      row.mean_fdp = std::numeric_limits<double>::quiet_NaN();
      row.se_fdp = std::numeric_limits<double>::quiet_NaN();
    }
    table.rows.push_back(row);
  }
  for (const auto& r : table.replicates) table.n_failed += r.failed ? 1 : 0;
  return table;
}

struct RankRow {
  double sweep_value = 0.0;
  double mean_T = 0.0;
  double median_T = 0.0;
  double q10 = 0.0;
  double q90 = 0.0;
  int n_censored = 0;
  int n_ok = 0;
  std::vector<Index> ranks;
};

struct RankTable {
  std::vector<RankRow> rows;
  int n_failed = 0;
};

/// Sample quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(xs.begin(), xs.end());
  const double h = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

inline RankTable run_rank_experiment(ExperimentConfig cfg) {
  if (cfg.mode != ExperimentMode::rank) throw input_error("config mode must be rank");
  validate(cfg);
  std::vector<double> sweep = cfg.sweep_values;
  if (cfg.sweep == SweepParameter::none) {
    sweep = {static_cast<double>(cfg.coefficients.k)};
  }
  RankTable table;
  std::optional<DesignSampler> shared_design;
  if (cfg.sweep != SweepParameter::rho) shared_design.emplace(cfg.design);
  for (std::size_t s = 0; s < sweep.size(); ++s) {
    CoefficientSpec coefficients = cfg.coefficients;
    std::optional<DesignSampler> own_design;
    if (cfg.sweep == SweepParameter::k) {
      const double kv = sweep[s];
      if (!(kv >= 0.0) || kv != std::floor(kv)) throw input_error("sweep values for k must be integers");
      coefficients.k = static_cast<Index>(kv);
      validate(coefficients);
    } else if (cfg.sweep == SweepParameter::rho) {
      DesignSpec d = cfg.design;
      d.rho = sweep[s];
      own_design.emplace(d);
    }
    const DesignSampler& design = own_design ? *own_design : *shared_design;
    const auto results = detail::run_replicates(cfg, design, coefficients, s);
    RankRow row;
    row.sweep_value = sweep[s];
    std::vector<double> ts;
    for (const auto& r : results) {
      if (r.failed) {
        ++table.n_failed;
        continue;
      }
      row.ranks.push_back(r.rank->rank);
      ts.push_back(static_cast<double>(r.rank->rank));
      row.n_censored += r.rank->censored ? 1 : 0;
    }
    row.n_ok = static_cast<int>(ts.size());
    double sum = 0.0;
    for (double t : ts) sum += t;
    row.mean_T = ts.empty() ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(ts.size());
    row.median_T = quantile(ts, 0.5);
    row.q10 = quantile(ts, 0.1);
    row.q90 = quantile(ts, 0.9);
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace crescent
