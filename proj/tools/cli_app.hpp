#pragma once

// Command-line front end. Everything lives here so tests can drive the
// commands in-process; main.cpp only forwards argv.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "crescent/crescent.hpp"

namespace crescent::cli {

enum ExitCode : int { ok = 0, invalid_input = 2, infeasible = 3, solver_failure = 4 };

inline constexpr const char* kOutputDirEnv = "CRESCENT_OUTPUT_DIR";

struct Output {
  std::string out;  // explicit --out
  bool gnuplot = false;
};

struct PriorFlags {
  std::string kind = "homogeneous";
  double M = 10.0;
  int m = 5;
  std::string atoms;  // "value:probability,..."
};

namespace detail {

inline std::string resolve_path(const Output& o, const std::string& command) {
  if (!o.out.empty()) return o.out;
  if (const char* dir = std::getenv(kOutputDirEnv); dir && *dir) {
    return (std::filesystem::path(dir) / (command + ".csv")).string();
  }
  return {};
}

inline void write_header(std::ostream& os, const std::string& command, const nlohmann::json& cfg,
                         std::optional<std::uint64_t> seed) {
  os << "# crescent " << kVersion << "\n";
  os << "# command: " << command << "\n";
  os << "# config: " << cfg.dump() << "\n";
  if (seed) os << "# seed: " << *seed << "\n";
}

inline std::string csv_row(std::initializer_list<std::string> cells) {
  std::string line;
  for (const auto& c : cells) {
    if (!line.empty()) line += ',';
    line += c;
  }
  return line + "\n";
}

inline std::string num(double x) { return io::format_double(x); }
inline std::string num(Index x) { return std::to_string(x); }

inline void write_gnuplot(const std::string& csv, const std::string& xlabel, const std::string& ylabel,
                          const std::vector<std::pair<int, std::string>>& series, int xcol) {
  std::ofstream gp(csv + ".gp");
  if (!gp) throw input_error("cannot write gnuplot script '" + csv + ".gp'");
  gp << "set datafile separator ','\n"
     << "set key top left\n"
     << "set xlabel '" << xlabel << "'\n"
     << "set ylabel '" << ylabel << "'\n"
     << "plot ";
  for (std::size_t i = 0; i < series.size(); ++i) {
    gp << (i ? ", \\\n     " : "") << "'" << std::filesystem::path(csv).filename().string()
       << "' every ::1 using " << xcol << ":" << series[i].first << " with lines title '"
       << series[i].second << "'";
  }
  gp << "\n";
}

// Writes `body` (header + CSV) to the resolved destination or to `out`.
inline void emit(const Output& o, const std::string& command, const std::string& body,
                 std::ostream& out) {
  const std::string path = resolve_path(o, command);
  if (path.empty()) {
    if (o.gnuplot) throw input_error("--gnuplot needs --out or " + std::string(kOutputDirEnv));
    out << body;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw input_error("cannot write output file '" + path + "'");
  f << body;
}

inline DiscretePrior build_prior(const PriorFlags& pf, double epsilon) {
  if (pf.kind == "homogeneous") return DiscretePrior::homogeneous(epsilon, pf.M);
  if (pf.kind == "heterogeneous") return DiscretePrior::heterogeneous(epsilon, pf.m, pf.M);
  if (pf.kind == "atoms") {
    std::vector<Atom> atoms;
    std::stringstream ss(pf.atoms);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) {
        throw input_error("--atoms entries must look like value:probability, got '" + item + "'");
      }
      try {
        atoms.push_back({std::stod(item.substr(0, colon)), std::stod(item.substr(colon + 1))});
      } catch (const std::logic_error&) {
        throw input_error("--atoms entry '" + item + "' is not numeric");
      }
    }
    return DiscretePrior(std::move(atoms));
  }
  throw input_error("--prior must be homogeneous, heterogeneous or atoms");
}

inline nlohmann::json prior_json(const PriorFlags& pf) {
  nlohmann::json j = {{"prior", pf.kind}};
  if (pf.kind == "atoms") {
    j["atoms"] = pf.atoms;
  } else {
    j["M"] = pf.M;
    if (pf.kind == "heterogeneous") j["m"] = pf.m;
  }
  return j;
}

}  // namespace detail

struct BoundaryArgs {
  double delta = 1.0;
  double epsilon = 0.2;
  int n_points = 99;
  bool allow_partial = false;
};

inline int cmd_boundary(const BoundaryArgs& a, const Output& o, std::ostream& out, std::ostream& err) {
  using detail::num;
  const ModelShape shape{a.delta, a.epsilon, 0.0};
  shape.validate();
  if (a.n_points < 1) throw input_error("--n-points must be at least 1");
  const CrescentTable table = lasso_crescent(shape, a.n_points);
  std::ostringstream body;
  detail::write_header(body, "boundary",
                       {{"delta", a.delta}, {"epsilon", a.epsilon}, {"n_points", a.n_points}},
                       std::nullopt);
  body << "u,t_delta,q_delta,varsigma,t_nabla,q_nabla\n";
  for (const auto& p : table.points) {
    body << detail::csv_row({num(p.u), num(p.t_delta), num(p.q_delta), num(p.varsigma),
                             num(p.t_nabla), num(p.q_nabla)});
  }
  if (table.points.empty()) {
    throw infeasible_error("no grid point is feasible for delta = " + num(a.delta) +
                           ", epsilon = " + num(a.epsilon));
  }
  detail::emit(o, "boundary", body.str(), out);
  if (o.gnuplot) {
    detail::write_gnuplot(detail::resolve_path(o, "boundary"), "TPP", "FDP",
                          {{3, "q_delta"}, {6, "q_nabla"}}, 1);
  }
  if (table.truncated) {
    err << "warning: boundaries exist only for u in [" << num(table.feasible_lo) << ", "
        << num(table.feasible_hi) << "]; rows outside were omitted\n";
    return a.allow_partial ? ok : infeasible;
  }
  return ok;
}

struct CurveArgs {
  double delta = 1.0;
  double epsilon = 0.2;
  double sigma = 0.0;
  int n_points = 99;
  PriorFlags prior;
};

inline int cmd_curve(const CurveArgs& a, const Output& o, std::ostream& out, std::ostream&) {
  using detail::num;
  const DiscretePrior prior = detail::build_prior(a.prior, a.epsilon);
  // Atom lists carry their own sparsity.
  const double eps = a.prior.kind == "atoms" ? prior.epsilon() : a.epsilon;
  const ModelShape shape{a.delta, eps, a.sigma};
  shape.validate();
  const TradeoffCurve curve = tradeoff_curve(prior, shape, a.n_points);
  nlohmann::json cfg = {{"delta", a.delta}, {"epsilon", eps}, {"sigma", a.sigma}, {"n_points", a.n_points}};
  cfg.update(detail::prior_json(a.prior));
  std::ostringstream body;
  detail::write_header(body, "curve", cfg, std::nullopt);
  body << "alpha,lambda,tau,tpp_inf,fdp_inf\n";
  for (const auto& p : curve.points) {
    body << detail::csv_row({num(p.alpha), num(p.lambda), num(p.tau), num(p.tpp), num(p.fdp)});
  }
  detail::emit(o, "curve", body.str(), out);
  if (o.gnuplot) detail::write_gnuplot(detail::resolve_path(o, "curve"), "TPP", "FDP", {{5, "fdp"}}, 4);
  return ok;
}

struct ExperimentArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> sigma;
  std::optional<int> replicates;
  std::optional<int> jobs;
  std::optional<int> n_points;
};

namespace detail {

inline ExperimentConfig resolve(const ExperimentArgs& a, ExperimentMode mode) {
  if (a.config.empty()) throw input_error("--config is required");
  ExperimentConfig cfg = config::load(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (a.sigma) cfg.sigma = *a.sigma;
  if (a.replicates) cfg.replicates = *a.replicates;
  if (a.jobs) cfg.jobs = *a.jobs;
  if (a.n_points) cfg.tpp_grid = uniform_tpp_grid(*a.n_points);
  cfg.mode = mode;
  if (mode == ExperimentMode::tradeoff && cfg.tpp_grid.empty()) cfg.tpp_grid = uniform_tpp_grid(99);
  validate(cfg);
  return cfg;
}

}  // namespace detail

inline int cmd_path(const ExperimentArgs& a, const Output& o, std::ostream& out, std::ostream&) {
  using detail::num;
  ExperimentConfig cfg = detail::resolve(a, ExperimentMode::tradeoff);
  const DesignSampler design(cfg.design);
  const std::uint64_t seed = rng::replicate_seed(cfg.seed, 0, 0);
  const Instance inst = draw_instance(design, cfg.coefficients, cfg.sigma, seed);
  PathOptions opts;
  opts.max_active = cfg.max_active;
  const LassoPath path = lasso_path(inst.X, inst.y, opts);
  const auto tf = tpp_fdp_along_path(path, inst.coefficients.support);
  std::ostringstream body;
  detail::write_header(body, "path", config::to_json(cfg), cfg.seed);
  body << "# stopping_reason: " << to_string(path.stopping_reason) << "\n";
  body << "event_index,lambda,kind,variable,n_active,tpp,fdp\n";
  for (std::size_t i = 0; i < path.events.size(); ++i) {
    const auto& e = path.events[i];
    body << detail::csv_row({std::to_string(i), num(e.lambda), to_string(e.kind), num(e.variable),
                             std::to_string(e.active_set.size()), num(tf[i].tpp), num(tf[i].fdp)});
  }
  detail::emit(o, "path", body.str(), out);
  if (o.gnuplot) detail::write_gnuplot(detail::resolve_path(o, "path"), "TPP", "FDP", {{7, "path"}}, 6);
  return ok;
}

inline int cmd_simulate(const ExperimentArgs& a, const Output& o, std::ostream& out, std::ostream& err) {
  using detail::num;
  const ExperimentConfig cfg = detail::resolve(a, ExperimentMode::tradeoff);
  const TradeoffTable table = run_tradeoff_experiment(cfg);
  std::ostringstream body;
  detail::write_header(body, "simulate", config::to_json(cfg), cfg.seed);
  body << "# failed_replicates: " << table.n_failed << "\n";
  body << "tpp_grid,mean_fdp,se_fdp,n_ok\n";
  for (const auto& r : table.rows) {
    body << detail::csv_row({num(r.tpp), num(r.mean_fdp), num(r.se_fdp), std::to_string(r.n_ok)});
  }
  if (table.n_failed > 0) err << "warning: " << table.n_failed << " replicate(s) failed and were excluded\n";
  detail::emit(o, "simulate", body.str(), out);
  if (o.gnuplot) {
    detail::write_gnuplot(detail::resolve_path(o, "simulate"), "TPP", "mean FDP", {{2, "mean FDP"}}, 1);
  }
  return ok;
}

inline int cmd_rank(const ExperimentArgs& a, const Output& o, std::ostream& out, std::ostream& err) {
  using detail::num;
  const ExperimentConfig cfg = detail::resolve(a, ExperimentMode::rank);
  const RankTable table = run_rank_experiment(cfg);
  std::ostringstream body;
  detail::write_header(body, "rank", config::to_json(cfg), cfg.seed);
  body << "# failed_replicates: " << table.n_failed << "\n";
  body << "sweep_value,mean_T,median_T,q10,q90,n_censored\n";
  for (const auto& r : table.rows) {
    body << detail::csv_row({num(r.sweep_value), num(r.mean_T), num(r.median_T), num(r.q10),
                             num(r.q90), std::to_string(r.n_censored)});
  }
  if (table.n_failed > 0) err << "warning: " << table.n_failed << " replicate(s) failed and were excluded\n";
  detail::emit(o, "rank", body.str(), out);
  if (o.gnuplot) {
    detail::write_gnuplot(detail::resolve_path(o, "rank"), "sweep value", "T",
                          {{2, "mean T"}, {3, "median T"}}, 1);
  }
  return ok;
}

/// Parses argv and runs one subcommand. Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Lasso crescent boundaries, state-evolution curves and Lasso path experiments"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  Output output;
  auto add_output = [&](CLI::App* sub) {
    sub->add_option("--out", output.out, "Output CSV path (default: $" + std::string(kOutputDirEnv) +
                                              "/<command>.csv, else stdout)");
    sub->add_flag("--gnuplot", output.gnuplot, "Also write <out>.gp plotting the CSV");
  };

  BoundaryArgs boundary;
  auto* b = app.add_subcommand("boundary", "Lower and upper crescent boundaries on a TPP grid");
  b->add_option("--delta", boundary.delta, "n/p")->capture_default_str();
  b->add_option("--epsilon", boundary.epsilon, "k/p")->capture_default_str();
  b->add_option("--n-points", boundary.n_points, "Grid points u = j/(n+1)")->capture_default_str();
  b->add_flag("--allow-partial", boundary.allow_partial, "Exit 0 when only part of the grid is feasible");
  add_output(b);

  CurveArgs curve;
  auto* c = app.add_subcommand("curve", "State-evolution TPP-FDP curve of a prior");
  c->add_option("--delta", curve.delta, "n/p")->capture_default_str();
  c->add_option("--epsilon", curve.epsilon, "k/p")->capture_default_str();
  c->add_option("--sigma", curve.sigma, "Noise level")->capture_default_str();
  c->add_option("--n-points", curve.n_points, "Number of TPP points")->capture_default_str();
  c->add_option("--prior", curve.prior.kind, "homogeneous | heterogeneous | atoms")
      ->check(CLI::IsMember({"homogeneous", "heterogeneous", "atoms"}))
      ->capture_default_str();
  c->add_option("--M", curve.prior.M, "Magnitude M")->capture_default_str();
  c->add_option("--m", curve.prior.m, "Number of levels (heterogeneous)")->capture_default_str();
  c->add_option("--atoms", curve.prior.atoms, "value:probability,... (absolute probabilities)");
  add_output(c);

  ExperimentArgs exp;
  auto add_experiment = [&](CLI::App* sub, bool replicated) {
    sub->add_option("--config", exp.config, "JSON experiment config")->required();
    sub->add_option("--seed", exp.seed, "Override the master seed");
    sub->add_option("--sigma", exp.sigma, "Override the noise level");
    if (replicated) {
      sub->add_option("--replicates", exp.replicates, "Override the replicate count");
      sub->add_option("--jobs", exp.jobs, "Worker threads (0 = all cores)");
    }
    add_output(sub);
  };
  auto* p = app.add_subcommand("path", "Event table of one seeded Lasso path");
  add_experiment(p, false);
  auto* s = app.add_subcommand("simulate", "Averaged TPP-FDP trade-off over replicates");
  add_experiment(s, true);
  s->add_option("--n-points", exp.n_points, "Override the TPP grid with j/(n+1)");
  auto* r = app.add_subcommand("rank", "Rank of the first false variable over replicates");
  add_experiment(r, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return ok;
  } catch (const CLI::CallForVersion& e) {
    out << kVersion << "\n";
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return invalid_input;
  }

  try {
    if (*b) return cmd_boundary(boundary, output, out, err);
    if (*c) return cmd_curve(curve, output, out, err);
    if (*p) return cmd_path(exp, output, out, err);
    if (*s) return cmd_simulate(exp, output, out, err);
    if (*r) return cmd_rank(exp, output, out, err);
  } catch (const input_error& e) {
    err << "error: " << e.what() << "\n";
    return invalid_input;
  } catch (const infeasible_error& e) {
    err << "error: " << e.what() << "\n";
    return infeasible;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return solver_failure;
  }
  return invalid_input;
}

}  // namespace crescent::cli
