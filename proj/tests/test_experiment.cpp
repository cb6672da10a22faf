#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "crescent/experiment.hpp"
#include "crescent/io.hpp"

using namespace crescent;

namespace {

std::filesystem::path scratch_dir() {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("crescent_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                    "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
  std::filesystem::create_directories(dir);
  return dir;
}

ExperimentConfig small_tradeoff(int replicates) {
  ExperimentConfig cfg;
  cfg.design.n = 100;
  cfg.design.p = 200;
  cfg.coefficients.p = 200;
  cfg.coefficients.kind = CoefficientKind::equal;
  cfg.coefficients.k = 20;
  cfg.coefficients.magnitude = 50.0;
  cfg.replicates = replicates;
  cfg.seed = 4;
  cfg.tpp_grid = uniform_tpp_grid(9);
  return cfg;
}

}  // namespace

TEST(Rng, ReplicateSeedsDiffer) {
  EXPECT_NE(rng::replicate_seed(1, 0, 0), rng::replicate_seed(1, 0, 1));
  EXPECT_NE(rng::replicate_seed(1, 0, 0), rng::replicate_seed(1, 1, 0));
  EXPECT_NE(rng::replicate_seed(1, 0, 0), rng::replicate_seed(2, 0, 0));
  EXPECT_EQ(rng::replicate_seed(9, 3, 7), rng::replicate_seed(9, 3, 7));
}

TEST(Rng, StreamsAreIndependent) {
  auto a = rng::stream(42, rng::Stream::design);
  auto b = rng::stream(42, rng::Stream::noise);
  auto c = rng::stream(42, rng::Stream::design);
  const auto x = a();
  EXPECT_NE(x, b());
  EXPECT_EQ(x, c());
}

TEST(Design, IidGaussianMoments) {
  DesignSpec spec;
  spec.n = 400;
  spec.p = 300;
  auto gen = rng::stream(1, rng::Stream::design);
  const auto X = sample_design(spec, gen);
  const double mean = X.mean();
  const double var = (X.array() - mean).square().mean();
  EXPECT_NEAR(mean, 0.0, 4.0 * std::sqrt(1.0 / 400 / X.size()));
  EXPECT_NEAR(var, 1.0 / 400, 0.02 / 400);
}

TEST(Design, ExplicitVariance) {
  DesignSpec spec;
  spec.n = 200;
  spec.p = 200;
  spec.variance = 4.0;
  auto gen = rng::stream(2, rng::Stream::design);
  const auto X = sample_design(spec, gen);
  EXPECT_NEAR(X.array().square().mean(), 4.0, 0.1);
}

TEST(Design, BernoulliEntries) {
  DesignSpec spec;
  spec.kind = DesignKind::bernoulli_pm;
  spec.n = 100;
  spec.p = 50;
  auto gen = rng::stream(3, rng::Stream::design);
  const auto X = sample_design(spec, gen);
  for (Index i = 0; i < X.size(); ++i) EXPECT_NEAR(std::abs(X.data()[i]), 0.1, 1e-15);
  EXPECT_NEAR(X.mean(), 0.0, 4.0 * 0.1 / std::sqrt(5000.0));
}

TEST(Design, ToeplitzLagCorrelation) {
  DesignSpec spec;
  spec.kind = DesignKind::correlated_gaussian;
  spec.n = 4000;
  spec.p = 20;
  spec.rho = 0.6;
  auto gen = rng::stream(4, rng::Stream::design);
  const auto X = sample_design(spec, gen);
  auto corr = [&](Index a, Index b) {
    return X.col(a).dot(X.col(b)) / (X.col(a).norm() * X.col(b).norm());
  };
  double lag1 = 0.0, lag2 = 0.0;
  for (Index j = 0; j + 2 < 20; ++j) {
    lag1 += corr(j, j + 1) / 18.0;
    lag2 += corr(j, j + 2) / 18.0;
  }
  EXPECT_NEAR(lag1, 0.6, 0.02);
  EXPECT_NEAR(lag2, 0.36, 0.02);
}

TEST(Design, EquicorrelationAndBadRho) {
  DesignSpec spec;
  spec.kind = DesignKind::correlated_gaussian;
  spec.structure = CorrelationStructure::equicorrelation;
  spec.n = 4000;
  spec.p = 10;
  spec.rho = 0.3;
  auto gen = rng::stream(5, rng::Stream::design);
  const auto X = sample_design(spec, gen);
  EXPECT_NEAR(X.col(2).dot(X.col(7)) / (X.col(2).norm() * X.col(7).norm()), 0.3, 0.05);
  spec.rho = -0.5;  // not positive definite for p = 10
  EXPECT_THROW(DesignSampler{spec}, input_error);
  spec.rho = 1.0;
  EXPECT_THROW(DesignSampler{spec}, input_error);
}

TEST(Design, MatrixAndGenotypeFiles) {
  const auto dir = scratch_dir();
  const auto path = (dir / "g.txt").string();
  {
    std::ofstream f(path);
    f << "# genotypes\n0 1 2\n1,1,0\n2 0 1\n0 2 2\n";
  }
  const auto M = io::load_matrix(path);
  ASSERT_EQ(M.rows(), 4);
  ASSERT_EQ(M.cols(), 3);
  EXPECT_EQ(M(1, 0), 1.0);

  DesignSpec spec;
  spec.kind = DesignKind::matrix_file;
  spec.path = path;
  const DesignSampler fixed(spec);
  auto gen = rng::stream(1, rng::Stream::design);
  EXPECT_EQ(fixed.sample(gen), M);
  EXPECT_EQ(fixed.cols(), 3);

  spec.kind = DesignKind::genotype_file;
  const DesignSampler geno(spec);
  const auto X = geno.sample(gen);
  for (Index j = 0; j < 3; ++j) {
    EXPECT_NEAR(X.col(j).sum(), 0.0, 1e-12);
    EXPECT_NEAR(X.col(j).norm(), 1.0, 1e-12);
  }
}

TEST(Design, BadMatrixFiles) {
  const auto dir = scratch_dir();
  const auto ragged = (dir / "ragged.txt").string();
  std::ofstream(ragged) << "1 2 3\n4 5\n";
  EXPECT_THROW(io::load_matrix(ragged), input_error);
  const auto text = (dir / "text.txt").string();
  std::ofstream(text) << "1 x 3\n";
  EXPECT_THROW(io::load_matrix(text), input_error);
  EXPECT_THROW(io::load_matrix((dir / "missing.txt").string()), input_error);
}

TEST(Coefficients, Examples) {
  auto gen = rng::stream(1, rng::Stream::coefficients);
  CoefficientSpec spec;
  spec.p = 6;
  spec.k = 3;

  spec.kind = CoefficientKind::equal;
  spec.magnitude = 2.5;
  auto c = sample_coefficients(spec, gen);
  EXPECT_EQ(c.beta, (Eigen::VectorXd(6) << 2.5, 2.5, 2.5, 0, 0, 0).finished());
  EXPECT_EQ(c.support, (std::vector<Index>{0, 1, 2}));

  spec.kind = CoefficientKind::geometric;
  spec.magnitude = 10.0;
  c = sample_coefficients(spec, gen);
  EXPECT_EQ(c.beta, (Eigen::VectorXd(6) << 1000, 100, 10, 0, 0, 0).finished());

  spec.kind = CoefficientKind::linear;
  c = sample_coefficients(spec, gen);
  EXPECT_EQ(c.beta, (Eigen::VectorXd(6) << 1, 2, 3, 0, 0, 0).finished());

  spec.kind = CoefficientKind::decreasing;
  spec.magnitude = 3.0;
  c = sample_coefficients(spec, gen);
  EXPECT_EQ(c.beta, (Eigen::VectorXd(6) << 3, 2, 1, 0, 0, 0).finished());

  spec.kind = CoefficientKind::fixed_levels;
  spec.values = {7.0, -1.0};
  spec.counts = {1, 2};
  c = sample_coefficients(spec, gen);
  EXPECT_EQ(c.beta, (Eigen::VectorXd(6) << 7, -1, -1, 0, 0, 0).finished());

  spec.kind = CoefficientKind::explicit_values;
  spec.values = {0.0, 4.0};
  c = sample_coefficients(spec, gen);
  EXPECT_EQ(c.support, (std::vector<Index>{1}));
}

TEST(Coefficients, Validation) {
  auto gen = rng::stream(1, rng::Stream::coefficients);
  CoefficientSpec spec;
  spec.p = 10;
  spec.kind = CoefficientKind::geometric;
  spec.k = 5;
  spec.magnitude = 1e100;
  EXPECT_THROW(sample_coefficients(spec, gen), input_error);
  spec.kind = CoefficientKind::equal;
  spec.k = 11;
  EXPECT_THROW(sample_coefficients(spec, gen), input_error);
  spec.kind = CoefficientKind::fixed_levels;
  spec.values = {1.0};
  spec.counts = {11};
  EXPECT_THROW(sample_coefficients(spec, gen), input_error);
  spec.kind = CoefficientKind::prior_sample;
  EXPECT_THROW(sample_coefficients(spec, gen), input_error);
}

TEST(Coefficients, PriorSampleFrequencies) {
  CoefficientSpec spec;
  spec.kind = CoefficientKind::prior_sample;
  spec.p = 200000;
  spec.prior = DiscretePrior({{5.0, 0.1}, {-1.0, 0.05}});
  auto gen = rng::stream(8, rng::Stream::coefficients);
  const auto c = sample_coefficients(spec, gen);
  const double f5 = (c.beta.array() == 5.0).cast<double>().mean();
  const double fm1 = (c.beta.array() == -1.0).cast<double>().mean();
  EXPECT_NEAR(f5, 0.1, 4.0 * std::sqrt(0.1 * 0.9 / 200000));
  EXPECT_NEAR(fm1, 0.05, 4.0 * std::sqrt(0.05 * 0.95 / 200000));
  EXPECT_NEAR(static_cast<double>(c.support.size()), (f5 + fm1) * 200000, 0.5);
}

TEST(Instance, NoiselessResponseIsExact) {
  DesignSpec d;
  d.n = 30;
  d.p = 40;
  CoefficientSpec c;
  c.p = 40;
  c.k = 4;
  const auto inst = draw_instance(DesignSampler(d), c, 0.0, 99);
  EXPECT_LE((inst.y - inst.X * inst.coefficients.beta).norm(), 1e-12);
  c.p = 41;
  EXPECT_THROW(draw_instance(DesignSampler(d), c, 0.0, 99), input_error);
}

TEST(FdpAtTpp, Examples) {
  const std::vector<TppFdp> s{{10, 0.25, 0.0}, {9, 0.25, 0.5}, {8, 0.5, 1.0 / 3}, {7, 1.0, 0.2}};
  EXPECT_EQ(*fdp_at_tpp(s, 0.0), 0.0);
  EXPECT_EQ(*fdp_at_tpp(s, 0.1), 0.0);
  EXPECT_EQ(*fdp_at_tpp(s, 0.25), 0.5);
  EXPECT_EQ(*fdp_at_tpp(s, 0.3), 0.5);
  EXPECT_DOUBLE_EQ(*fdp_at_tpp(s, 0.5), 1.0 / 3);
  EXPECT_EQ(*fdp_at_tpp(s, 1.0), 0.2);
  const std::vector<TppFdp> shortp{{10, 0.25, 0.0}};
  EXPECT_FALSE(fdp_at_tpp(shortp, 0.5));
}

TEST(Quantile, LinearInterpolation) {
  EXPECT_EQ(quantile({3, 1, 2, 4}, 0.5), 2.5);
  EXPECT_EQ(quantile({5}, 0.9), 5.0);
  EXPECT_NEAR(quantile({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 0.1), 1.9, 1e-12);
  EXPECT_TRUE(std::isnan(quantile({}, 0.5)));
}

TEST(TradeoffExperiment, DeterministicAcrossJobs) {
  auto cfg = small_tradeoff(6);
  cfg.sigma = 0.5;
  cfg.jobs = 1;
  const auto a = run_tradeoff_experiment(cfg);
  cfg.jobs = 4;
  const auto b = run_tradeoff_experiment(cfg);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].mean_fdp, b.rows[i].mean_fdp);
    EXPECT_EQ(a.rows[i].se_fdp, b.rows[i].se_fdp);
    EXPECT_EQ(a.rows[i].n_ok, b.rows[i].n_ok);
  }
  for (std::size_t i = 0; i < a.replicates.size(); ++i) {
    EXPECT_EQ(a.replicates[i].seed, b.replicates[i].seed);
  }
}

TEST(TradeoffExperiment, SeedChangesResults) {
  auto cfg = small_tradeoff(4);
  const auto a = run_tradeoff_experiment(cfg);
  cfg.seed = 5;
  const auto b = run_tradeoff_experiment(cfg);
  bool differ = false;
  for (std::size_t i = 0; i < a.rows.size(); ++i) differ |= a.rows[i].mean_fdp != b.rows[i].mean_fdp;
  EXPECT_TRUE(differ);
}

TEST(TradeoffExperiment, RowsAreSane) {
  const auto t = run_tradeoff_experiment(small_tradeoff(5));
  ASSERT_EQ(t.rows.size(), 9u);
  EXPECT_EQ(t.n_failed, 0);
  for (const auto& r : t.rows) {
    EXPECT_GE(r.mean_fdp, 0.0);
    EXPECT_LE(r.mean_fdp, 1.0);
    EXPECT_GE(r.se_fdp, 0.0);
    EXPECT_LE(r.n_ok, 5);
  }
}

TEST(TradeoffExperiment, EarlyStopDoesNotChangeTable) {
  auto cfg = small_tradeoff(3);
  cfg.sigma = 0.3;
  cfg.tpp_grid = {0.1, 0.3, 0.5};
  const auto stopped = run_tradeoff_experiment(cfg);
  cfg.tpp_grid = {0.1, 0.3, 0.5, 1.0};  // grid up to 1 runs the full path
  const auto full = run_tradeoff_experiment(cfg);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(stopped.rows[i].mean_fdp, full.rows[i].mean_fdp);
    EXPECT_EQ(stopped.rows[i].n_ok, full.rows[i].n_ok);
  }
}

TEST(TradeoffExperiment, InputErrorsPropagate) {
  auto cfg = small_tradeoff(2);
  cfg.coefficients.p = 150;
  EXPECT_THROW(run_tradeoff_experiment(cfg), input_error);
  cfg = small_tradeoff(2);
  cfg.tpp_grid = {0.5, 0.2};
  EXPECT_THROW(run_tradeoff_experiment(cfg), input_error);
  cfg = small_tradeoff(2);
  cfg.mode = ExperimentMode::rank;
  EXPECT_THROW(run_tradeoff_experiment(cfg), input_error);
}

TEST(TradeoffExperiment, FailureFraction) {
  // Column 3 is a near-copy of column 1, so the active Gram matrix turns
  // singular whenever the path needs both.
  const auto dir = scratch_dir();
  const auto path = (dir / "twin.txt").string();
  {
    std::mt19937_64 gen(1);
    std::normal_distribution<double> z(0.0, 1.0);
    Eigen::MatrixXd X(6, 4);
    for (Index i = 0; i < 6; ++i)
      for (Index j = 0; j < 4; ++j) X(i, j) = z(gen);
    X.col(3) = X.col(1) + 1e-9 * X.col(2);
    std::ofstream f(path);
    f.precision(17);
    f << X << "\n";
  }
  ExperimentConfig cfg;
  cfg.design.kind = DesignKind::matrix_file;
  cfg.design.path = path;
  cfg.coefficients.kind = CoefficientKind::explicit_values;
  cfg.coefficients.p = 4;
  cfg.coefficients.values = {1.0, 2.0};
  cfg.sigma = 1.0;
  cfg.replicates = 40;
  cfg.max_active = 4;
  cfg.tpp_grid = {0.5, 1.0};
  cfg.max_failure_fraction = 0.99;
  const auto table = run_tradeoff_experiment(cfg);
  ASSERT_GT(table.n_failed, 0);
  ASSERT_LT(table.n_failed, 40);
  for (const auto& r : table.replicates) {
    if (r.failed) EXPECT_NE(r.error.find("singular"), std::string::npos);
  }
  // Failed replicates are excluded from the averages.
  EXPECT_LE(table.rows[0].n_ok, 40 - table.n_failed);

  cfg.max_failure_fraction = 0.0;
  try {
    run_tradeoff_experiment(cfg);
    ADD_FAILURE() << "expected convergence_error";
  } catch (const convergence_error& e) {
    EXPECT_NE(std::string(e.what()).find("replicates failed"), std::string::npos);
  }
}

TEST(RankExperiment, EqualEffectsNoiseless) {
  ExperimentConfig cfg;
  cfg.mode = ExperimentMode::rank;
  cfg.design.n = 200;
  cfg.design.p = 400;
  cfg.coefficients.p = 400;
  cfg.coefficients.kind = CoefficientKind::equal;
  cfg.coefficients.magnitude = 10.0;
  cfg.sweep = SweepParameter::k;
  cfg.sweep_values = {5, 40};
  cfg.replicates = 6;
  const auto t = run_rank_experiment(cfg);
  ASSERT_EQ(t.rows.size(), 2u);
  for (const auto& r : t.rows) {
    EXPECT_EQ(r.n_ok, 6);
    EXPECT_EQ(r.ranks.size(), 6u);
    for (Index T : r.ranks) {
      EXPECT_GE(T, 1);
      EXPECT_LE(T, static_cast<Index>(r.sweep_value) + 1);
    }
    EXPECT_LE(r.q10, r.median_T);
    EXPECT_LE(r.median_T, r.q90);
  }
  cfg.sweep_values = {2.5};
  EXPECT_THROW(run_rank_experiment(cfg), input_error);
}

TEST(RankExperiment, RhoSweepDeterministicAcrossJobs) {
  ExperimentConfig cfg;
  cfg.mode = ExperimentMode::rank;
  cfg.design.kind = DesignKind::correlated_gaussian;
  cfg.design.n = 100;
  cfg.design.p = 150;
  cfg.coefficients.p = 150;
  cfg.coefficients.k = 10;
  cfg.coefficients.magnitude = 5.0;
  cfg.sigma = 0.5;
  cfg.sweep = SweepParameter::rho;
  cfg.sweep_values = {0.0, 0.5};
  cfg.replicates = 5;
  const auto a = run_rank_experiment(cfg);
  cfg.jobs = 3;
  const auto b = run_rank_experiment(cfg);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(a.rows[i].ranks, b.rows[i].ranks);
}
