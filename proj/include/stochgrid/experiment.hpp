// SPDX-License-Identifier: Apache-2.0
#pragma once

// Batch experiments: binds a config file to the library modules, runs one of
// the experiment kinds over a seeded ensemble and writes report.json, CSV
// data files and a hashed manifest into the output directory. The runner is
// compiled (src/experiment.cpp); everything it calls is header-only.
//
// Report bytes depend only on (config, seed). Worker count and output path
// are left out of the config echo, and wall-clock time goes to timing.json,
// which the manifest does not cover.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stochgrid/config.hpp"
#include "stochgrid/errors.hpp"
#include "stochgrid/hedging_bs.hpp"
#include "stochgrid/report_io.hpp"

namespace stochgrid {

using Json = nlohmann::ordered_json;

/// A module error annotated with the experiment that raised it. The original
/// error is attached as a nested exception.
class ExperimentError : public Error {
public:
  using Error::Error;
};

enum class ExperimentKind { convergence, limit_compare, count_asymptotics, design_audit, hedge, lemma_psi };

inline const char* to_string(ExperimentKind k) noexcept {
  switch (k) {
    case ExperimentKind::convergence: return "convergence";
    case ExperimentKind::limit_compare: return "limit-compare";
    case ExperimentKind::count_asymptotics: return "count-asymptotics";
    case ExperimentKind::design_audit: return "design-audit";
    case ExperimentKind::hedge: return "hedge";
    case ExperimentKind::lemma_psi: return "lemma-psi";
  }
  return "unknown";
}

inline std::optional<ExperimentKind> parse_kind(const std::string& s) {
  for (auto k : {ExperimentKind::convergence, ExperimentKind::limit_compare, ExperimentKind::count_asymptotics,
                 ExperimentKind::design_audit, ExperimentKind::hedge, ExperimentKind::lemma_psi})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

struct ModelConfig {
  std::string preset = "brownian";  ///< brownian | gbm | black-scholes
  std::size_t dim = 1;
  double mu = 0.05;
  double sigma = 0.2;
  double x0 = 0.0;
  BsSpec bs;
};

struct ThetaConfig {
  /// constant | affine | state-square | no-bad-days | min-std
  std::string strategy = "constant";
  double value = 1.0;  ///< constant level, or intercept of affine / state-square
  double slope = 0.0;  ///< affine: value + slope t
  double scale = 1.0;  ///< state-square: value + scale Y_1(t)^2
  std::vector<double> c{1.0};
  double budget = 500.0;
  ClampBounds bounds;
  std::vector<std::string> candidates{"min-std", "constant"};
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::convergence;
  std::string label;
  std::uint64_t seed = 1;
  std::size_t paths = 1000;
  std::size_t pilot_paths = 1000;
  std::vector<double> n{256.0};
  std::size_t kappa = 16;
  std::size_t mesh_steps = 0;  ///< 0: derive from kappa and the intensity bound
  double horizon = 1.0;
  double alpha = 0.01;
  double tolerance = 0.0;      ///< 0: kind default
  unsigned jobs = 1;
  std::filesystem::path out = "out";
  std::size_t identity_instances = 0;
  std::size_t bins = 8;
  std::vector<std::uint64_t> refinements;
  std::size_t replication_paths = 0;
  int psi_p = 2;
  double psi_weight = 1.0;
  ModelConfig model;
  std::string integrand = "identity";
  ThetaConfig theta;

  /// Time horizon of the experiment: V for the Black-Scholes preset.
  double effective_horizon() const { return model.preset == "black-scholes" ? model.bs.V : horizon; }

  double effective_tolerance() const {
    if (tolerance > 0.0) return tolerance;
    switch (kind) {
      case ExperimentKind::convergence: return 0.07;
      case ExperimentKind::limit_compare: return 0.0;
      case ExperimentKind::count_asymptotics: return 0.01;
      case ExperimentKind::design_audit: return 0.10;
      case ExperimentKind::hedge: return 0.10;
      case ExperimentKind::lemma_psi: return 0.1;
    }
    return 0.0;
  }

  void validate() const {
    if (paths == 0 || pilot_paths < 2 || kappa == 0 || bins < 2) throw ConfigError("counts must be positive");
    if (n.empty()) throw ConfigError("at least one grid scale n is required");
    for (double v : n)
      if (!(v >= 1.0)) throw ConfigError("grid scale n must be at least 1");
    if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (jobs == 0) throw ConfigError("jobs must be at least 1");
    if (psi_p != 1 && psi_p != 2) throw UnsupportedError("psi_p must be 1 or 2");
    if (model.preset == "black-scholes") model.bs.validate();
  }
};

inline const ConfigFile::Schema& experiment_schema() {
  static const ConfigFile::Schema schema{
      {"run",
       {"kind", "label", "seed", "paths", "pilot_paths", "n", "kappa", "mesh_steps", "horizon", "alpha", "tolerance",
        "jobs", "out", "identity_instances", "bins", "refinements", "replication_paths", "psi_p", "psi_weight"}},
      {"model", {"preset", "dim", "mu", "sigma", "x0", "S0", "K", "r", "T", "V"}},
      {"integrand", {"preset"}},
      {"theta", {"strategy", "value", "slope", "scale", "c", "budget", "clamp_low", "clamp_high", "candidates"}},
  };
  return schema;
}

inline ExperimentConfig experiment_from(const ConfigFile& f) {
  f.check_schema(experiment_schema());
  ExperimentConfig c;
  const std::string kind = f.text("run", "kind", "");
  if (kind.empty()) f.fail_at("run", "kind", "missing experiment kind");
  const auto k = parse_kind(kind);
  if (!k) f.fail_at("run", "kind", "unknown experiment kind '" + kind + "'");
  c.kind = *k;
  c.label = f.text("run", "label", "");
  c.seed = f.integer("run", "seed", c.seed);
  c.paths = f.integer("run", "paths", c.paths);
  c.pilot_paths = f.integer("run", "pilot_paths", c.pilot_paths);
  c.n = f.reals("run", "n", c.n);
  c.kappa = f.integer("run", "kappa", c.kappa);
  c.mesh_steps = f.integer("run", "mesh_steps", c.mesh_steps);
  c.horizon = f.real("run", "horizon", c.horizon);
  c.alpha = f.real("run", "alpha", c.alpha);
  c.tolerance = f.real("run", "tolerance", c.tolerance);
  c.jobs = static_cast<unsigned>(f.integer("run", "jobs", c.jobs));
  c.out = f.text("run", "out", c.out.string());
  c.identity_instances = f.integer("run", "identity_instances", 0);
  c.bins = f.integer("run", "bins", c.bins);
  c.refinements = f.integers("run", "refinements", {});
  c.replication_paths = f.integer("run", "replication_paths", 0);
  c.psi_p = static_cast<int>(f.integer("run", "psi_p", 2));
  c.psi_weight = f.real("run", "psi_weight", 1.0);

  auto& m = c.model;
  m.preset = f.text("model", "preset", m.preset);
  if (m.preset != "brownian" && m.preset != "gbm" && m.preset != "black-scholes")
    f.fail_at("model", "preset", "unknown model preset '" + m.preset + "'");
  m.dim = f.integer("model", "dim", 1);
  if (m.dim == 0) f.fail_at("model", "dim", "dimension must be positive");
  m.mu = f.real("model", "mu", m.mu);
  m.sigma = f.real("model", "sigma", m.sigma);
  m.x0 = f.real("model", "x0", m.preset == "gbm" ? 1.0 : 0.0);
  if (m.preset == "black-scholes") {
    const double T = f.real("model", "T", 1.0);
    m.bs = {f.real("model", "S0", 100.0), f.real("model", "K", 100.0), f.real("model", "r", 0.0), m.mu,
            m.sigma,                      T,                            f.real("model", "V", 0.95 * T)};
    if (m.dim != 1) f.fail_at("model", "dim", "the Black-Scholes preset has a fixed (S, R) state");
  }

  c.integrand = f.text("integrand", "preset", m.preset == "black-scholes" ? "bs-hedge" : "identity");
  const bool bs_integrand_name = c.integrand == "bs-hedge";
  if (bs_integrand_name != (m.preset == "black-scholes"))
    f.fail_at("integrand", "preset", "bs-hedge goes with the black-scholes model and only with it");
  if (!bs_integrand_name && c.integrand != "identity" && c.integrand != "square" && c.integrand != "sine")
    f.fail_at("integrand", "preset", "unknown integrand preset '" + c.integrand + "'");

  auto& t = c.theta;
  t.strategy = f.text("theta", "strategy", t.strategy);
  if (t.strategy != "constant" && t.strategy != "affine" && t.strategy != "state-square" &&
      t.strategy != "no-bad-days" && t.strategy != "min-std")
    f.fail_at("theta", "strategy", "unknown intensity strategy '" + t.strategy + "'");
  t.value = f.real("theta", "value", t.value);
  t.slope = f.real("theta", "slope", t.slope);
  t.scale = f.real("theta", "scale", t.scale);
  // "none" leaves the list empty, which skips the no-bad-days part of hedge runs
  if (f.text("theta", "c", "") != "none") t.c = f.reals("theta", "c", t.c);
  else t.c.clear();
  t.budget = f.real("theta", "budget", t.budget);
  t.bounds.lower = f.real("theta", "clamp_low", t.bounds.lower);
  t.bounds.upper = f.real("theta", "clamp_high", t.bounds.upper);
  t.candidates = f.words("theta", "candidates", t.candidates);
  for (const auto& cand : t.candidates)
    if (cand != "min-std" && cand != "constant" && cand != "no-bad-days")
      f.fail_at("theta", "candidates", "unknown audit candidate '" + cand + "'");

  const bool needs_c = t.strategy == "no-bad-days" ||
                       std::find(t.candidates.begin(), t.candidates.end(), "no-bad-days") != t.candidates.end();
  if (needs_c && t.c.empty()) f.fail_at("theta", "c", "the no-bad-days intensity needs a constant c");
  for (double v : t.c)
    if (!(v > 0.0)) f.fail_at("theta", "c", "no-bad-days constants must be positive");

  try {
    c.validate();
  } catch (const Error& e) {
    throw ConfigError(f.origin() + ": " + e.what());
  }
  return c;
}

inline ExperimentConfig load_experiment(const std::filesystem::path& path) {
  return experiment_from(ConfigFile::load(path));
}

/// Config echo for reports. Leaves out jobs and out, which must not change results.
inline Json config_echo(const ExperimentConfig& c) {
  Json j;
  j["kind"] = to_string(c.kind);
  j["label"] = c.label;
  j["seed"] = c.seed;
  j["paths"] = c.paths;
  j["pilot_paths"] = c.pilot_paths;
  j["n"] = c.n;
  j["kappa"] = c.kappa;
  j["mesh_steps"] = c.mesh_steps;
  j["horizon"] = c.effective_horizon();
  j["alpha"] = c.alpha;
  j["tolerance"] = c.effective_tolerance();
  j["identity_instances"] = c.identity_instances;
  j["bins"] = c.bins;
  j["refinements"] = c.refinements;
  j["replication_paths"] = c.replication_paths;
  j["psi_p"] = c.psi_p;
  j["psi_weight"] = c.psi_weight;
  Json m;
  m["preset"] = c.model.preset;
  if (c.model.preset == "black-scholes") {
    const BsSpec& b = c.model.bs;
    m["S0"] = b.S0;
    m["K"] = b.K;
    m["r"] = b.r;
    m["mu"] = b.mu;
    m["sigma"] = b.sigma;
    m["T"] = b.T;
    m["V"] = b.V;
  } else {
    m["dim"] = c.model.dim;
    m["mu"] = c.model.mu;
    m["sigma"] = c.model.sigma;
    m["x0"] = c.model.x0;
  }
  j["model"] = m;
  j["integrand"] = c.integrand;
  Json t;
  t["strategy"] = c.theta.strategy;
  t["value"] = c.theta.value;
  t["slope"] = c.theta.slope;
  t["scale"] = c.theta.scale;
  t["c"] = c.theta.c;
  t["budget"] = c.theta.budget;
  t["clamp_low"] = c.theta.bounds.lower;
  t["clamp_high"] = c.theta.bounds.upper;
  t["candidates"] = c.theta.candidates;
  j["theta"] = t;
  return j;
}

// Runner ---------------------------------------------------------------------

struct RunReport {
  Json report;
  bool pass = false;
  std::vector<ManifestEntry> manifest;  ///< every file written, report.json included
  double seconds = 0.0;
  std::filesystem::path out;
};

/// Runs one experiment end to end and writes its files into cfg.out.
/// Module errors are rethrown as ExperimentError with the cause nested.
RunReport run(const ExperimentConfig& cfg);

struct SweepResult {
  std::vector<RunReport> runs;
  std::filesystem::path csv;
  bool pass = false;
};

/// Copies of `base` with the axis key (section.key) set to each value.
std::vector<ConfigFile> expand_axis(const ConfigFile& base, const std::string& axis,
                                    const std::vector<std::string>& values);

/// Runs configs that differ only along `axis` (section.key) and writes one
/// sweep.csv row per config: axis value, verdict and the run summary.
SweepResult sweep(const std::vector<ConfigFile>& configs, const std::string& axis,
                  const std::filesystem::path& out_root, std::optional<std::uint64_t> seed = std::nullopt,
                  unsigned jobs = 1);

}  // namespace stochgrid
