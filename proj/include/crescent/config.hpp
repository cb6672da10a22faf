#pragma once

// JSON form of ExperimentConfig. Parsing is strict: unknown keys and wrong
// types are reported with the dotted path of the offending field.

#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crescent/errors.hpp"
#include "crescent/experiment.hpp"
#include "crescent/io.hpp"
#include "crescent/prior.hpp"

namespace crescent::config {

using nlohmann::json;

namespace detail {

inline std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

inline void check_keys(const json& j, const std::string& where, std::set<std::string> allowed) {
  if (!j.is_object()) throw input_error("config field '" + where + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) {
      throw input_error("config field '" + join(where, key) + "' is not recognized");
    }
  }
}

template <class T>
T read(const json& j, const std::string& where, const std::string& key) {
  const std::string field = join(where, key);
  if (!j.contains(key)) throw input_error("config field '" + field + "' is required");
  const json& v = j.at(key);
  if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw input_error("config field '" + field + "' must be a string");
  } else if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw input_error("config field '" + field + "' must be a boolean");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw input_error("config field '" + field + "' must be an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v.is_number_integer() && !v.is_number_unsigned()) {
        throw input_error("config field '" + field + "' must be nonnegative");
      }
    }
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw input_error("config field '" + field + "' must be a number");
  } else {
    if (!v.is_array()) throw input_error("config field '" + field + "' must be an array");
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) {
        throw input_error("config field '" + field + "[" + std::to_string(i) + "]' must be a number");
      }
    }
  }
  return v.get<T>();
}

template <class T>
T read_or(const json& j, const std::string& where, const std::string& key, T fallback) {
  return j.contains(key) ? read<T>(j, where, key) : fallback;
}

template <class E>
E read_enum(const json& j, const std::string& where, const std::string& key,
            const std::vector<std::pair<std::string, E>>& names, std::optional<E> fallback = {}) {
  if (!j.contains(key) && fallback) return *fallback;
  const auto s = read<std::string>(j, where, key);
  std::string options;
  for (const auto& [name, value] : names) {
    if (name == s) return value;
    options += (options.empty() ? "" : ", ") + name;
  }
  throw input_error("config field '" + join(where, key) + "' must be one of {" + options +
                    "}, got '" + s + "'");
}

inline const std::vector<std::pair<std::string, DesignKind>> kDesignKinds = {
    {"iid_gaussian", DesignKind::iid_gaussian},
    {"correlated_gaussian", DesignKind::correlated_gaussian},
    {"bernoulli_pm", DesignKind::bernoulli_pm},
    {"genotype_file", DesignKind::genotype_file},
    {"matrix_file", DesignKind::matrix_file}};

inline const std::vector<std::pair<std::string, CorrelationStructure>> kStructures = {
    {"toeplitz", CorrelationStructure::toeplitz},
    {"equicorrelation", CorrelationStructure::equicorrelation}};

inline const std::vector<std::pair<std::string, CoefficientKind>> kCoefficientKinds = {
    {"prior_sample", CoefficientKind::prior_sample}, {"fixed_levels", CoefficientKind::fixed_levels},
    {"geometric", CoefficientKind::geometric},       {"linear", CoefficientKind::linear},
    {"equal", CoefficientKind::equal},               {"decreasing", CoefficientKind::decreasing},
    {"explicit", CoefficientKind::explicit_values}};

inline const std::vector<std::pair<std::string, ExperimentMode>> kModes = {
    {"tradeoff", ExperimentMode::tradeoff}, {"rank", ExperimentMode::rank}};

inline const std::vector<std::pair<std::string, SweepParameter>> kSweeps = {
    {"none", SweepParameter::none}, {"k", SweepParameter::k}, {"rho", SweepParameter::rho}};

template <class E>
std::string name_of(const std::vector<std::pair<std::string, E>>& names, E value) {
  for (const auto& [name, v] : names) {
    if (v == value) return name;
  }
  return "unknown";
}

}  // namespace detail

/// Prior from {"type": "homogeneous", "epsilon", "M"},
/// {"type": "heterogeneous", "epsilon", "m", "M"} or
/// {"type": "atoms", "atoms": [{"value", "probability"}, ...]}.
inline DiscretePrior prior_from_json(const json& j, const std::string& where) {
  using namespace detail;
  const auto type = read<std::string>(j, where, "type");
  if (type == "homogeneous") {
    check_keys(j, where, {"type", "epsilon", "M"});
    return DiscretePrior::homogeneous(read<double>(j, where, "epsilon"), read<double>(j, where, "M"));
  }
  if (type == "heterogeneous") {
    check_keys(j, where, {"type", "epsilon", "m", "M"});
    return DiscretePrior::heterogeneous(read<double>(j, where, "epsilon"), read<int>(j, where, "m"),
                                        read<double>(j, where, "M"));
  }
  if (type == "atoms") {
    check_keys(j, where, {"type", "atoms"});
    const std::string f = join(where, "atoms");
    if (!j.contains("atoms") || !j.at("atoms").is_array()) {
      throw input_error("config field '" + f + "' must be an array");
    }
    std::vector<Atom> atoms;
    for (std::size_t i = 0; i < j.at("atoms").size(); ++i) {
      const std::string w = f + "[" + std::to_string(i) + "]";
      const json& a = j.at("atoms")[i];
      check_keys(a, w, {"value", "probability"});
      atoms.push_back({read<double>(a, w, "value"), read<double>(a, w, "probability")});
    }
    return DiscretePrior(std::move(atoms));
  }
  throw input_error("config field '" + join(where, "type") +
                    "' must be one of {homogeneous, heterogeneous, atoms}, got '" + type + "'");
}

inline json prior_to_json(const DiscretePrior& prior) {
  json atoms = json::array();
  for (const auto& a : prior.atoms()) atoms.push_back({{"value", a.value}, {"probability", a.probability}});
  return {{"type", "atoms"}, {"atoms", atoms}};
}

inline ExperimentConfig from_json(const json& j) {
  using namespace detail;
  check_keys(j, "", {"mode", "seed", "replicates", "sigma", "jobs", "design", "coefficients",
                     "tpp_grid", "tpp_grid_points", "sweep", "max_active", "max_failure_fraction"});
  ExperimentConfig cfg;
  cfg.mode = read_enum(j, "", "mode", kModes, std::optional{ExperimentMode::tradeoff});
  cfg.seed = read_or<std::uint64_t>(j, "", "seed", cfg.seed);
  cfg.replicates = read_or<int>(j, "", "replicates", cfg.replicates);
  cfg.sigma = read_or<double>(j, "", "sigma", cfg.sigma);
  cfg.jobs = read_or<int>(j, "", "jobs", cfg.jobs);
  cfg.max_active = read_or<Index>(j, "", "max_active", cfg.max_active);
  cfg.max_failure_fraction = read_or<double>(j, "", "max_failure_fraction", cfg.max_failure_fraction);

  if (!j.contains("design")) throw input_error("config field 'design' is required");
  const json& d = j.at("design");
  check_keys(d, "design", {"kind", "n", "p", "rho", "structure", "variance", "path", "jitter_sd"});
  cfg.design.kind = read_enum(d, "design", "kind", kDesignKinds);
  cfg.design.n = read_or<Index>(d, "design", "n", cfg.design.n);
  cfg.design.p = read_or<Index>(d, "design", "p", cfg.design.p);
  cfg.design.rho = read_or<double>(d, "design", "rho", cfg.design.rho);
  cfg.design.structure =
      read_enum(d, "design", "structure", kStructures, std::optional{cfg.design.structure});
  cfg.design.variance = read_or<double>(d, "design", "variance", cfg.design.variance);
  cfg.design.path = read_or<std::string>(d, "design", "path", cfg.design.path);
  cfg.design.jitter_sd = read_or<double>(d, "design", "jitter_sd", cfg.design.jitter_sd);

  if (!j.contains("coefficients")) throw input_error("config field 'coefficients' is required");
  const json& c = j.at("coefficients");
  check_keys(c, "coefficients", {"kind", "p", "k", "M", "prior", "values", "counts"});
  cfg.coefficients.kind = read_enum(c, "coefficients", "kind", kCoefficientKinds);
  Index default_p = cfg.design.p;
  if (!c.contains("p") && (cfg.design.kind == DesignKind::genotype_file ||
                           cfg.design.kind == DesignKind::matrix_file)) {
    if (cfg.design.path.empty()) throw input_error("config field 'design.path' is required");
    default_p = io::load_matrix(cfg.design.path).cols();
  }
  cfg.coefficients.p = read_or<Index>(c, "coefficients", "p", default_p);
  cfg.coefficients.k = read_or<Index>(c, "coefficients", "k", cfg.coefficients.k);
  cfg.coefficients.magnitude = read_or<double>(c, "coefficients", "M", cfg.coefficients.magnitude);
  if (c.contains("prior")) cfg.coefficients.prior = prior_from_json(c.at("prior"), "coefficients.prior");
  cfg.coefficients.values =
      read_or<std::vector<double>>(c, "coefficients", "values", cfg.coefficients.values);
  if (c.contains("counts")) {
    for (double v : read<std::vector<double>>(c, "coefficients", "counts")) {
      if (v != std::floor(v)) throw input_error("config field 'coefficients.counts' must hold integers");
      cfg.coefficients.counts.push_back(static_cast<Index>(v));
    }
  }

  if (j.contains("tpp_grid") && j.contains("tpp_grid_points")) {
    throw input_error("config fields 'tpp_grid' and 'tpp_grid_points' are mutually exclusive");
  }
  cfg.tpp_grid = read_or<std::vector<double>>(j, "", "tpp_grid", {});
  if (j.contains("tpp_grid_points")) cfg.tpp_grid = uniform_tpp_grid(read<int>(j, "", "tpp_grid_points"));

  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    check_keys(s, "sweep", {"parameter", "values"});
    cfg.sweep = read_enum(s, "sweep", "parameter", kSweeps);
    cfg.sweep_values = read<std::vector<double>>(s, "sweep", "values");
  }
  validate(cfg);
  return cfg;
}

inline json to_json(const ExperimentConfig& cfg) {
  using namespace detail;
  json d = {{"kind", name_of(kDesignKinds, cfg.design.kind)},
            {"n", cfg.design.n},
            {"p", cfg.design.p}};
  if (cfg.design.kind == DesignKind::correlated_gaussian) {
    d["rho"] = cfg.design.rho;
    d["structure"] = name_of(kStructures, cfg.design.structure);
  }
  if (cfg.design.variance > 0.0) d["variance"] = cfg.design.variance;
  if (!cfg.design.path.empty()) d["path"] = cfg.design.path;
  if (cfg.design.jitter_sd >= 0.0) d["jitter_sd"] = cfg.design.jitter_sd;

  json c = {{"kind", name_of(kCoefficientKinds, cfg.coefficients.kind)}, {"p", cfg.coefficients.p}};
  switch (cfg.coefficients.kind) {
    case CoefficientKind::prior_sample:
      c["prior"] = prior_to_json(*cfg.coefficients.prior);
      break;
    case CoefficientKind::fixed_levels:
      c["values"] = cfg.coefficients.values;
      c["counts"] = cfg.coefficients.counts;
      break;
    case CoefficientKind::explicit_values:
      c["values"] = cfg.coefficients.values;
      break;
    case CoefficientKind::linear:
      c["k"] = cfg.coefficients.k;
      break;
    default:
      c["k"] = cfg.coefficients.k;
      c["M"] = cfg.coefficients.magnitude;
  }
  json out = {{"mode", name_of(kModes, cfg.mode)},
              {"seed", cfg.seed},
              {"replicates", cfg.replicates},
              {"sigma", cfg.sigma},
              {"max_active", cfg.max_active},
              {"max_failure_fraction", cfg.max_failure_fraction},
              {"design", d},
              {"coefficients", c}};
  if (!cfg.tpp_grid.empty()) out["tpp_grid"] = cfg.tpp_grid;
  if (cfg.sweep != SweepParameter::none) {
    out["sweep"] = {{"parameter", name_of(kSweeps, cfg.sweep)}, {"values", cfg.sweep_values}};
  }
  return out;
}

inline ExperimentConfig load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw input_error("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return from_json(j);
}

}  // namespace crescent::config
