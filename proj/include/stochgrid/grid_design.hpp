// SPDX-License-Identifier: Apache-2.0
#pragma once

// Designing the grid intensity for errors of the asymptotic form
//   sqrt(n) eps(t) ~ int_0^t f(s) / sqrt(theta(s)) dW(s),
// where E eps(t)^2 = (1/n) int_0^t E f^2 / theta ds and E N = n int E theta.
//
//   no bad days:  theta = c f^2                     eps = W / sqrt(c n)
//   min std:      theta = C f / (n int_0^V E f ds)  E eps(V)^2 = (int E f)^2 / C
//
// The min-std choice attains the Cauchy-Schwarz lower bound (int E f)^2 / C
// among all adapted intensities with E N <= C.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "stochgrid/ensemble.hpp"
#include "stochgrid/error_process.hpp"
#include "stochgrid/errors.hpp"
#include "stochgrid/limit_law.hpp"
#include "stochgrid/path_engine.hpp"
#include "stochgrid/random_grid.hpp"
#include "stochgrid/stats.hpp"

namespace stochgrid {

/// Nonnegative adapted process f of the asymptotic error law.
using FProcess = PathFunctional;

/// f(t) = sqrt(1/2 sum_{k,m} (beta^T J beta)_{k,m}^2): the error density of the
/// scaled Euler error, i.e. Delta = (beta^T J beta) / sqrt(2 theta).
inline FProcess euler_error_density(IntegrandSpec f, SdeSpec spec) {
  return [f = std::move(f), spec = std::move(spec)](const AdaptedView& v) {
    const std::size_t d = spec.dim;
    std::vector<double> block(d * d), scratch;
    error_coefficients(f, spec, v.t(), v.state(), block, scratch);
    double s = 0.0;
    for (double b : block) s += b * b;
    return std::sqrt(0.5 * s);
  };
}

enum class DesignStrategy { constant, no_bad_days, min_std };

inline const char* to_string(DesignStrategy s) noexcept {
  switch (s) {
    case DesignStrategy::constant: return "constant";
    case DesignStrategy::no_bad_days: return "no-bad-days";
    case DesignStrategy::min_std: return "min-std";
  }
  return "unknown";
}

struct MeanIntegralEstimate {
  double value = 0.0;   ///< estimate of int_0^V E g(s) ds
  double stderr = 0.0;  ///< sample std / sqrt(paths)
  std::size_t paths = 0;
};

struct DesignPrediction {
  DesignStrategy strategy = DesignStrategy::constant;
  double expected_count = 0.0;     ///< E N
  double terminal_variance = 0.0;  ///< E eps(V)^2, unscaled error
};

struct DesignSpec {
  DesignStrategy strategy = DesignStrategy::constant;
  double budget = 0.0;    ///< C, expected intervention count (min-std, constant)
  double c = 0.0;         ///< no-bad-days constant
  FProcess f;
  double horizon = 1.0;   ///< V
  ClampBounds bounds;

  void validate() const {
    if (!f && strategy != DesignStrategy::constant) throw ConfigError("design needs an f-process");
    if (strategy == DesignStrategy::no_bad_days && !(c > 0.0)) throw ConfigError("no-bad-days constant c must be positive");
    if (strategy != DesignStrategy::no_bad_days && !(budget > 0.0)) throw ConfigError("intervention budget C must be positive");
    if (!(horizon > 0.0)) throw ConfigError("design horizon must be positive");
  }
};

inline ThetaSpec no_bad_days_theta(FProcess f, double c, ClampBounds bounds = {}) {
  if (!(c > 0.0)) throw ConfigError("no-bad-days constant c must be positive");
  return {ThetaKind::no_bad_days,
          [f = std::move(f), c](const AdaptedView& v) {
            const double fv = f(v);
            return c * fv * fv;
          },
          bounds, "no-bad-days"};
}

/// E N = c n int E f^2,  E eps(V)^2 = V / (c n).
inline DesignPrediction no_bad_days_prediction(double c, double n, const MeanIntegralEstimate& mean_f_squared,
                                               double horizon) {
  return {DesignStrategy::no_bad_days, c * n * mean_f_squared.value, horizon / (c * n)};
}

inline ThetaSpec min_std_theta(FProcess f, double budget, const MeanIntegralEstimate& mean_f, double n,
                               ClampBounds bounds = {}) {
  if (!(mean_f.value > 0.0)) throw DesignError("min-std design needs a positive int E f ds");
  if (!(budget > 0.0)) throw ConfigError("intervention budget C must be positive");
  const double scale = budget / (n * mean_f.value);
  return {ThetaKind::min_std, [f = std::move(f), scale](const AdaptedView& v) { return scale * f(v); }, bounds,
          "min-std"};
}

/// E N = C,  E eps(V)^2 = (int E f)^2 / C.
inline DesignPrediction min_std_prediction(double budget, const MeanIntegralEstimate& mean_f) {
  return {DesignStrategy::min_std, budget, mean_f.value * mean_f.value / budget};
}

/// Constant intensity spending the budget C uniformly on [0, V].
inline ThetaSpec budget_constant_theta(double budget, double n, double horizon, ClampBounds bounds = {}) {
  ThetaSpec t = constant_theta(budget / (n * horizon), bounds);
  t.label = "constant";
  return t;
}

inline ThetaSpec design_theta(const DesignSpec& spec, double n, const MeanIntegralEstimate& mean_f) {
  spec.validate();
  switch (spec.strategy) {
    case DesignStrategy::no_bad_days: return no_bad_days_theta(spec.f, spec.c, spec.bounds);
    case DesignStrategy::min_std: return min_std_theta(spec.f, spec.budget, mean_f, n, spec.bounds);
    case DesignStrategy::constant: break;
  }
  return budget_constant_theta(spec.budget, n, spec.horizon, spec.bounds);
}

/// Ensemble mean of int_0^V g(s) ds over `paths` pilot paths (trapezoid rule).
/// Pilot paths come from the pilot substream block of `seed`.
inline MeanIntegralEstimate estimate_mean_integral(const SdeSpec& model, const PathFunctional& g, const TimeMesh& mesh,
                                                   std::size_t paths, std::uint64_t seed, unsigned jobs = 1) {
  if (paths < 2) throw ConfigError("mean integral estimate needs at least two paths");
  const auto per_path = parallel_map(paths, jobs, [&](std::size_t k) {
    const PathBundle b = simulate_bundle(model, mesh, pilot_seed(seed, k));
    std::vector<double> vals(mesh.points());
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = g(AdaptedView(b.state.path, i));
    return trapezoid(vals, mesh.dt());
  });
  const Moments m = moments(per_path);
  return {m.mean, m.stderr_mean, paths};
}

inline MeanIntegralEstimate estimate_mean_f_integral(const SdeSpec& model, const FProcess& f, const TimeMesh& mesh,
                                                     std::size_t paths, std::uint64_t seed, unsigned jobs = 1) {
  return estimate_mean_integral(model, f, mesh, paths, seed, jobs);
}

/// Monte Carlo value of (1/n) int_0^V E f^2 / theta ds.
inline MeanIntegralEstimate error_variance(const SdeSpec& model, const FProcess& f, const ThetaSpec& theta, double n,
                                           const TimeMesh& mesh, std::size_t paths, std::uint64_t seed,
                                           unsigned jobs = 1) {
  theta.validate();
  const auto g = [&](const AdaptedView& v) {
    const double fv = f(v);
    return fv * fv / theta.evaluate(v).value;
  };
  MeanIntegralEstimate e = estimate_mean_integral(model, g, mesh, paths, seed, jobs);
  e.value /= n;
  e.stderr /= n;
  return e;
}

// Optimality audit -----------------------------------------------------------

struct AuditSetup {
  SdeSpec model;
  IntegrandSpec integrand;  ///< f of the Euler error whose variance is audited
  FProcess f;               ///< error density of that integrand
  TimeMesh mesh;            ///< [0, V]
  double n = 256.0;
  double budget = 500.0;
  std::size_t pilot_paths = 1000;
  std::size_t paths = 10000;
  std::uint64_t seed = 1;
  unsigned jobs = 1;
  double count_tolerance = 0.01;
  int max_normalization_rounds = 12;
};

struct AuditCandidate {
  std::string name;
  ThetaSpec theta;
};

struct AuditRow {
  std::string strategy;
  double scale = 1.0;           ///< factor applied to the candidate to meet the budget
  double count_pred = 0.0;      ///< n int E theta
  double count_real = 0.0;      ///< mean N
  double count_stderr = 0.0;
  double variance_pred = 0.0;   ///< (1/n) int E f^2 / theta
  double variance_real = 0.0;   ///< Var(U^n(V)) / n
  double variance_stderr = 0.0;
  double bound = 0.0;           ///< (int E f)^2 / C
  std::size_t clamp_events = 0;
};

struct AuditTable {
  std::vector<AuditRow> rows;
  MeanIntegralEstimate mean_f;  ///< from the evaluation ensemble
  double budget = 0.0;
  std::string best_strategy;
};

inline ThetaSpec scaled_theta(const ThetaSpec& base, double factor) {
  ThetaSpec t = base;
  t.evaluator = [inner = base.evaluator, factor](const AdaptedView& v) { return factor * inner(v); };
  return t;
}

/// Mean intervention count of `theta` over the audit's pilot ensemble.
inline double pilot_count(const AuditSetup& s, const ThetaSpec& theta) {
  const auto counts = parallel_map(s.pilot_paths, s.jobs, [&](std::size_t k) {
    const PathBundle b = simulate_bundle(s.model, s.mesh, pilot_seed(s.seed, k));
    return static_cast<double>(intervention_count(build_grid(theta, s.n, b.state, s.mesh.horizon)));
  });
  return moments(counts).mean;
}

/// Rescales `theta` until its pilot-estimated E N matches the budget.
inline std::pair<ThetaSpec, double> normalize_to_budget(const AuditSetup& s, const ThetaSpec& theta) {
  double factor = 1.0;
  for (int round = 0; round < s.max_normalization_rounds; ++round) {
    const ThetaSpec t = scaled_theta(theta, factor);
    const double count = pilot_count(s, t);
    if (!(count > 0.0)) break;
    if (std::abs(count / s.budget - 1.0) <= s.count_tolerance) return {t, factor};
    factor *= s.budget / count;
  }
  throw AuditError("candidate '" + theta.label + "' could not be normalized to the intervention budget");
}

/// Runs every candidate, normalized to E N = C, through the full U^n pipeline
/// on a common evaluation ensemble.
inline AuditTable optimality_audit(const AuditSetup& s, const std::vector<AuditCandidate>& candidates) {
  if (candidates.empty()) throw AuditError("optimality audit without candidates");
  std::vector<ThetaSpec> thetas;
  std::vector<double> factors;
  for (const auto& c : candidates) {
    auto [t, factor] = normalize_to_budget(s, c.theta);
    thetas.push_back(std::move(t));
    factors.push_back(factor);
  }

  struct PathResult {
    double f_integral = 0.0;
    std::vector<double> terminal, count, theta_integral, density_integral;
    std::vector<std::size_t> clamps;
  };
  const std::size_t nc = thetas.size();
  const double lambda = std::sqrt(s.n);
  const auto per_path = parallel_map(s.paths, s.jobs, [&](std::size_t k) {
    const PathBundle b = simulate_bundle(s.model, s.mesh, path_seed(s.seed, k));
    const StatePath& y = b.state;
    const std::vector<double> fvals = integrand_on_mesh(s.integrand, y);
    std::vector<double> fproc(s.mesh.points());
    for (std::size_t i = 0; i < fproc.size(); ++i) fproc[i] = s.f(AdaptedView(y.path, i));
    PathResult r;
    r.f_integral = trapezoid(fproc, s.mesh.dt());
    std::vector<double> th(s.mesh.points()), dens(s.mesh.points());
    for (std::size_t c = 0; c < nc; ++c) {
      const RandomGrid g = build_grid(thetas[c], s.n, y, s.mesh.horizon);
      r.clamps.push_back(g.clamp_low + g.clamp_high);
      r.terminal.push_back(euler_error(fvals, y, g, lambda).back());
      r.count.push_back(static_cast<double>(intervention_count(g)));
      for (std::size_t i = 0; i < th.size(); ++i) {
        th[i] = thetas[c].evaluate(AdaptedView(y.path, i)).value;
        dens[i] = fproc[i] * fproc[i] / th[i];
      }
      r.theta_integral.push_back(trapezoid(th, s.mesh.dt()));
      r.density_integral.push_back(trapezoid(dens, s.mesh.dt()));
    }
    return r;
  });

  AuditTable table;
  table.budget = s.budget;
  std::vector<double> buf(per_path.size());
  for (std::size_t k = 0; k < per_path.size(); ++k) buf[k] = per_path[k].f_integral;
  const Moments mf = moments(buf);
  table.mean_f = {mf.mean, mf.stderr_mean, per_path.size()};
  double best = INFINITY;
  for (std::size_t c = 0; c < nc; ++c) {
    AuditRow row;
    row.strategy = candidates[c].name;
    row.scale = factors[c];
    row.bound = mf.mean * mf.mean / s.budget;
    for (std::size_t k = 0; k < per_path.size(); ++k) buf[k] = per_path[k].count[c];
    const Moments mc = moments(buf);
    row.count_real = mc.mean;
    row.count_stderr = mc.stderr_mean;
    for (std::size_t k = 0; k < per_path.size(); ++k) buf[k] = per_path[k].theta_integral[c];
    row.count_pred = s.n * moments(buf).mean;
    for (std::size_t k = 0; k < per_path.size(); ++k) buf[k] = per_path[k].density_integral[c];
    row.variance_pred = moments(buf).mean / s.n;
    for (std::size_t k = 0; k < per_path.size(); ++k) buf[k] = per_path[k].terminal[c];
    const Moments mu = moments(buf);
    row.variance_real = mu.variance / s.n;
    row.variance_stderr = mu.stderr_variance / s.n;
    for (const auto& p : per_path) row.clamp_events += p.clamps[c];
    if (row.variance_real < best) {
      best = row.variance_real;
      table.best_strategy = row.strategy;
    }
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace stochgrid
