// SPDX-License-Identifier: Apache-2.0

#include "stochgrid/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>

#include "stochgrid/ensemble.hpp"
#include "stochgrid/error_process.hpp"
#include "stochgrid/grid_design.hpp"
#include "stochgrid/limit_law.hpp"
#include "stochgrid/path_engine.hpp"
#include "stochgrid/random_grid.hpp"
#include "stochgrid/rng.hpp"
#include "stochgrid/stats.hpp"

namespace stochgrid {

namespace {

// Building blocks ------------------------------------------------------------

SdeSpec make_model(const ModelConfig& m) {
  if (m.preset == "black-scholes") return bs_model(m.bs);
  if (m.preset == "gbm") return gbm_model(m.mu, m.sigma, std::vector<double>(m.dim, m.x0));
  return brownian_model(m.dim, std::vector<double>(m.dim, m.x0));
}

IntegrandSpec make_integrand(const std::string& name, const ModelConfig& m) {
  if (name == "bs-hedge") return bs_integrand(m.bs);
  if (name == "square") return square_integrand(m.dim);
  if (name == "sine") return sine_integrand(m.dim);
  return identity_integrand(m.dim);
}

/// Everything an experiment kind needs, built once from the config.
struct ExperimentContext {
  const ExperimentConfig& cfg;
  SdeSpec model;
  IntegrandSpec integrand;
  FProcess f;  ///< error density of the integrand
  double horizon;

  explicit ExperimentContext(const ExperimentConfig& c)
      : cfg(c),
        model(make_model(c.model)),
        integrand(make_integrand(c.integrand, c.model)),
        f(c.model.preset == "black-scholes" ? bs_f_process(c.model.bs) : euler_error_density(integrand, model)),
        horizon(c.effective_horizon()) {}

  bool black_scholes() const { return cfg.model.preset == "black-scholes"; }

  std::string fingerprint(double n, const TimeMesh& mesh) const {
    return model.name + "/" + integrand.name + "/" + cfg.theta.strategy + "/n=" + format_number(n) +
           "/steps=" + std::to_string(mesh.steps) + "/seed=" + std::to_string(cfg.seed);
  }

  TimeMesh mesh(double n) const {
    if (cfg.mesh_steps) return TimeMesh::make(horizon, cfg.mesh_steps);
    const ThetaConfig& t = cfg.theta;
    double top = 0.0;
    if (t.strategy == "constant")
      top = t.value;
    else if (t.strategy == "affine")
      top = std::max(t.value, t.value + t.slope * horizon);
    else
      throw ConfigError("[run] mesh_steps is required for the path-dependent strategy '" + t.strategy + "'");
    top = std::clamp(top, t.bounds.lower, t.bounds.upper);
    return mesh_for_grid(horizon, n, top, cfg.kappa);
  }

  MeanIntegralEstimate mean_f(const TimeMesh& mesh) const {
    return estimate_mean_f_integral(model, f, mesh, cfg.pilot_paths, cfg.seed, cfg.jobs);
  }

  /// Intensity for `strategy`; `c` is the no-bad-days constant.
  ThetaSpec theta(const std::string& strategy, double n, const TimeMesh& mesh, double c) const {
    const ThetaConfig& t = cfg.theta;
    if (strategy == "constant") return constant_theta(t.value, t.bounds);
    if (strategy == "affine") {
      ThetaSpec s = deterministic_theta([a = t.value, b = t.slope](double time) { return a + b * time; }, t.bounds);
      s.label = "affine";
      return s;
    }
    if (strategy == "state-square")
      return path_theta([a = t.value, b = t.scale](const AdaptedView& v) { return a + b * v[0] * v[0]; }, t.bounds,
                        "state-square");
    if (strategy == "no-bad-days")
      return black_scholes() ? bs_no_bad_days_theta(cfg.model.bs, c, t.bounds) : no_bad_days_theta(f, c, t.bounds);
    const MeanIntegralEstimate mf = mean_f(mesh);
    return black_scholes() ? bs_min_std_theta(cfg.model.bs, t.budget, mf, n, t.bounds)
                           : min_std_theta(f, t.budget, mf, n, t.bounds);
  }

  ThetaSpec theta(double n, const TimeMesh& mesh) const {
    return theta(cfg.theta.strategy, n, mesh, cfg.theta.c.empty() ? 1.0 : cfg.theta.c.front());
  }
};

Json moments_json(const Moments& m) {
  return Json{{"count", m.count},
              {"mean", m.mean},
              {"variance", m.variance},
              {"stderr_mean", m.stderr_mean},
              {"stderr_variance", m.stderr_variance}};
}

Json comparison_json(const ComparisonReport& r) {
  return Json{{"a", r.label_a},
              {"b", r.label_b},
              {"ks_statistic", r.ks_statistic},
              {"critical_value", r.critical_value},
              {"alpha", r.alpha},
              {"p_value", r.p_value},
              {"moments_a", moments_json(r.moments_a)},
              {"moments_b", moments_json(r.moments_b)},
              {"pass", r.pass}};
}

/// One comparison as a CSV row body: D, critical value, alpha, p-value, pass.
std::vector<double> comparison_row(const ComparisonReport& r) {
  return {r.ks_statistic, r.critical_value, r.alpha, r.p_value, r.pass ? 1.0 : 0.0};
}

std::string tag(double n) { return "n" + format_number(n); }

/// Sample files for path 0 of an ensemble: states with driving noise, grid and error process.
void write_path_files(OutputDir& out, const std::string& suffix, const PathBundle& b, const RandomGrid& g,
                      const ErrorSample& e) {
  const std::size_t d = b.state.dim();
  const TimeMesh& mesh = b.state.mesh();
  std::vector<std::string> head{"t"};
  for (std::size_t c = 0; c < d; ++c) head.push_back("Y" + std::to_string(c + 1));
  for (std::size_t c = 0; c < d; ++c) head.push_back("B" + std::to_string(c + 1));
  {
    CsvWriter w = out.csv("path_" + suffix + ".csv", head);
    std::vector<double> row(1 + 2 * d);
    for (std::size_t i = 0; i < mesh.points(); ++i) {
      row[0] = mesh.time(i);
      for (std::size_t c = 0; c < d; ++c) {
        row[1 + c] = b.state.path(i, c);
        row[1 + d + c] = b.brownian.path(i, c);
      }
      w.row(row);
    }
  }
  {
    CsvWriter w = out.csv("grid_" + suffix + ".csv", {"k", "tau_k", "snapped_index"});
    for (std::size_t k = 0; k < g.taus.size(); ++k)
      w.row({static_cast<double>(k), g.taus[k], static_cast<double>(g.snapped[k])});
  }
  std::vector<std::string> eh{"t", "U"};
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) eh.push_back("Z" + std::to_string(i + 1) + std::to_string(j + 1));
  CsvWriter w = out.csv("error_" + suffix + ".csv", eh);
  std::vector<double> row(2 + d * d);
  for (std::size_t i = 0; i < mesh.points(); ++i) {
    row[0] = mesh.time(i);
    row[1] = e.U[i];
    for (std::size_t k = 0; k < d * d; ++k) row[2 + k] = e.Z[i * d * d + k];
    w.row(row);
  }
}

/// Recomputes path 0 of an ensemble and writes its sample files.
void write_first_path(const ExperimentContext& ctx, OutputDir& out, double n, const TimeMesh& mesh,
                             const ThetaSpec& theta) {
  const PathBundle b = simulate_bundle(ctx.model, mesh, path_seed(ctx.cfg.seed, 0));
  const RandomGrid g = build_grid(theta, n, b.state, ctx.horizon);
  write_path_files(out, tag(n), b, g, error_sample(ctx.integrand, b.state, g));
}

// Experiment kinds -------------------------------------------------------------

struct KindResult {
  Json results;
  Json summary;  ///< flat scalars, one sweep CSV column each
  bool pass = false;
};

KindResult run_convergence(const ExperimentContext& ctx, OutputDir& out) {
  const ExperimentConfig& cfg = ctx.cfg;
  const double tol = cfg.effective_tolerance();
  KindResult res;
  res.pass = true;
  Json per_n = Json::array();
  for (double n : cfg.n) {
    const TimeMesh mesh = ctx.mesh(n);
    const ThetaSpec theta = ctx.theta(n, mesh);
    struct Row {
      double terminal, sup, energy, count;
    };
    const auto rows = parallel_map(cfg.paths, cfg.jobs, [&](std::size_t k) {
      const PathBundle b = simulate_bundle(ctx.model, mesh, path_seed(cfg.seed, k));
      const RandomGrid g = build_grid(theta, n, b.state, ctx.horizon);
      const std::vector<double> u = euler_error(ctx.integrand, b.state, g);
      const DeltaField delta = delta_field(ctx.integrand, ctx.model, theta, b.state);
      return Row{u.back(), sup_statistic(u), delta_energy(delta), static_cast<double>(intervention_count(g)) / n};
    });
    write_first_path(ctx, out, n, mesh, theta);
    std::vector<double> terminal, sup, energy, count;
    {
      CsvWriter w = out.csv("terminals_" + tag(n) + ".csv", {"path", "U_T", "sup_U", "delta_energy", "N_over_n"});
      for (std::size_t k = 0; k < rows.size(); ++k) {
        const Row& r = rows[k];
        terminal.push_back(r.terminal);
        sup.push_back(r.sup);
        energy.push_back(r.energy);
        count.push_back(r.count);
        w.row({static_cast<double>(k), r.terminal, r.sup, r.energy, r.count});
      }
    }
    const Moments mt = moments(terminal), me = moments(energy);
    const double gap = mt.variance / me.mean - 1.0;
    const bool ok = std::abs(gap) <= tol;
    res.pass = res.pass && ok;
    per_n.push_back(Json{{"n", n},
                         {"mesh_steps", mesh.steps},
                         {"terminal", moments_json(mt)},
                         {"sup", moments_json(moments(sup))},
                         {"predicted_variance", me.mean},
                         {"predicted_variance_stderr", me.stderr_mean},
                         {"relative_gap", gap},
                         {"mean_count_over_n", moments(count).mean},
                         {"pass", ok}});
    if (res.summary.empty()) {
      res.summary["n"] = n;
      res.summary["variance"] = mt.variance;
      res.summary["variance_stderr"] = mt.stderr_variance;
      res.summary["predicted_variance"] = me.mean;
      res.summary["relative_gap"] = gap;
    }
  }
  res.results["per_n"] = per_n;

  if (cfg.identity_instances > 0) {
    if (ctx.model.dim != 1) throw UnsupportedError("the discrete error identity check needs a one-dimensional model");
    const double n = cfg.n.front();
    const TimeMesh mesh = ctx.mesh(n);
    const ThetaSpec theta = ctx.theta(n, mesh);
    const IntegrandSpec family[] = {identity_integrand(), square_integrand(), sine_integrand()};
    const auto devs = parallel_map(cfg.identity_instances, cfg.jobs, [&](std::size_t k) {
      const PathBundle b = simulate_bundle(ctx.model, mesh, path_seed(cfg.seed, cfg.paths + k));
      const RandomGrid g = build_grid(theta, n, b.state, ctx.horizon);
      return theorem_identity(family[k % 3], b.state, g);
    });
    Json by_f = Json::object();
    double worst = 0.0;
    {
      CsvWriter w = out.csv("identity.csv", {"instance", "integrand", "max_abs", "relative"});
      for (std::size_t k = 0; k < devs.size(); ++k) {
        w.row({static_cast<double>(k), static_cast<double>(k % 3), devs[k].max_abs, devs[k].relative});
        worst = std::max(worst, devs[k].relative);
        const std::string name = family[k % 3].name;
        by_f[name] = std::max(by_f.value(name, 0.0), devs[k].relative);
      }
    }
    const bool ok = worst <= 1e-10;
    res.results["identity"] = Json{{"instances", devs.size()}, {"max_relative", worst}, {"by_integrand", by_f},
                                   {"bound", 1e-10}, {"pass", ok}};
    res.summary["identity_max_relative"] = worst;
    res.pass = res.pass && ok;
  }
  return res;
}

KindResult run_limit_compare(const ExperimentContext& ctx, OutputDir& out) {
  const ExperimentConfig& cfg = ctx.cfg;
  const double n = cfg.n.front();
  const TimeMesh mesh = ctx.mesh(n);
  const ThetaSpec theta = ctx.theta(n, mesh);
  const std::size_t P = cfg.paths;
  struct Row {
    double y, u, sup;
  };
  // paths [0, P): Euler error; paths [P, 2P): limit construction on its own noise
  const auto rows = parallel_map(2 * P, cfg.jobs, [&](std::size_t k) {
    const SeedRecord seed = path_seed(cfg.seed, k);
    const PathBundle b = simulate_bundle(ctx.model, mesh, seed);
    const double y = b.state.path(mesh.steps, 0);
    if (k < P) {
      const RandomGrid g = build_grid(theta, n, b.state, ctx.horizon);
      const std::vector<double> u = euler_error(ctx.integrand, b.state, g);
      return Row{y, u.back(), sup_statistic(u)};
    }
    const DeltaField delta = delta_field(ctx.integrand, ctx.model, theta, b.state);
    const LimitSample s = sample_limit(delta, limit_seed(seed));
    return Row{y, s.u_star.back(), sup_statistic(s.u_star)};
  });
  write_first_path(ctx, out, n, mesh, theta);
  {
    const SeedRecord seed = path_seed(cfg.seed, P);
    const PathBundle b = simulate_bundle(ctx.model, mesh, seed);
    const LimitSample s = sample_limit(delta_field(ctx.integrand, ctx.model, theta, b.state), limit_seed(seed));
    CsvWriter w = out.csv("limit_" + tag(n) + ".csv", {"t", "U_star"});
    for (std::size_t i = 0; i < mesh.points(); ++i) w.row({mesh.time(i), s.u_star[i]});
  }

  const std::string config = ctx.fingerprint(n, mesh);
  PairedSample approx{{}, {}, config, "euler"}, limit{{}, {}, config, "limit"};
  std::vector<double> sup_n, sup_star;
  {
    CsvWriter w = out.csv("terminals_" + tag(n) + ".csv", {"pair", "Y_T", "U_T", "sup_U", "Y_T_star", "U_star_T",
                                                           "sup_U_star"});
    for (std::size_t k = 0; k < P; ++k) {
      const Row& a = rows[k];
      const Row& b = rows[P + k];
      approx.y.push_back(a.y);
      approx.u.push_back(a.u);
      sup_n.push_back(a.sup);
      limit.y.push_back(b.y);
      limit.u.push_back(b.u);
      sup_star.push_back(b.sup);
      w.row({static_cast<double>(k), a.y, a.u, a.sup, b.y, b.u, b.sup});
    }
  }
  const std::string prov = "seed=" + std::to_string(cfg.seed) + ",paths=" + std::to_string(P);
  const ComparisonReport ks_terminal =
      ks_two_sample({approx.u, "U^n(T)", prov}, {limit.u, "U*(T)", prov}, cfg.alpha);
  const ComparisonReport ks_sup = ks_two_sample({sup_n, "sup|U^n|", prov}, {sup_star, "sup|U*|", prov}, cfg.alpha);
  const JointLawReport joint = joint_law_check(approx, limit, cfg.alpha);
  const IndependenceReport indep = independence_check({approx.u, "U^n(T)", prov}, {approx.y, "Y(T)", prov});

  {
    CsvWriter w = out.csv("comparisons.csv", {"test", "D", "critical", "alpha", "p_value", "pass"});
    w.row("terminal", comparison_row(ks_terminal));
    w.row("sup", comparison_row(ks_sup));
    for (const auto& s : joint.subtests) w.row(s.label_a, comparison_row(s));
  }

  KindResult res;
  Json subtests = Json::array();
  for (const auto& s : joint.subtests) subtests.push_back(comparison_json(s));
  res.results = Json{{"n", n},
                     {"mesh_steps", mesh.steps},
                     {"configuration", config},
                     {"ks_terminal", comparison_json(ks_terminal)},
                     {"ks_sup", comparison_json(ks_sup)},
                     {"joint_law", Json{{"alpha", joint.alpha},
                                        {"alpha_per_test", joint.alpha_per_test},
                                        {"subtests", subtests},
                                        {"pass", joint.pass}}},
                     {"independence", Json{{"paths", indep.paths},
                                           {"r_linear", indep.r_linear},
                                           {"r_square", indep.r_square},
                                           {"bound", indep.bound},
                                           {"pass_linear", indep.pass_linear},
                                           {"pass_square", indep.pass_square},
                                           {"pass", indep.pass}}}};
  res.summary = Json{{"n", n},
                     {"ks_terminal", ks_terminal.ks_statistic},
                     {"ks_sup", ks_sup.ks_statistic},
                     {"critical_value", ks_terminal.critical_value},
                     {"r_linear", indep.r_linear},
                     {"variance_euler", ks_terminal.moments_a.variance},
                     {"variance_limit", ks_terminal.moments_b.variance}};
  res.pass = ks_terminal.pass && ks_sup.pass && joint.pass && indep.pass;
  return res;
}

KindResult run_count_asymptotics(const ExperimentContext& ctx, OutputDir& out) {
  const ExperimentConfig& cfg = ctx.cfg;
  const double tol = cfg.effective_tolerance();
  KindResult res;
  res.pass = true;
  Json per_n = Json::array();
  for (double n : cfg.n) {
    const TimeMesh mesh = ctx.mesh(n);
    const ThetaSpec theta = ctx.theta(n, mesh);
    const auto counts = parallel_map(cfg.paths, cfg.jobs, [&](std::size_t k) {
      const PathBundle b = simulate_bundle(ctx.model, mesh, path_seed(cfg.seed, k));
      return count_for_path(theta, n, b.state.path);
    });
    const CountAsymptotics s = summarize_counts(counts);
    {
      CsvWriter w = out.csv("counts_" + tag(n) + ".csv", {"path", "N_over_n", "theta_integral"});
      for (std::size_t k = 0; k < counts.size(); ++k)
        w.row({static_cast<double>(k), counts[k].count_over_n, counts[k].theta_integral});
    }
    const double gap = std::abs(s.mean_count_over_n - s.mean_theta_integral) / s.mean_theta_integral;
    const bool ok = gap <= tol;
    res.pass = res.pass && ok;
    per_n.push_back(Json{{"n", n},
                         {"mesh_steps", mesh.steps},
                         {"mean_count_over_n", s.mean_count_over_n},
                         {"count_over_n_stderr", moments(s.count_over_n).stderr_mean},
                         {"mean_theta_integral", s.mean_theta_integral},
                         {"relative_gap", gap},
                         {"max_relative_deviation", s.max_relative_deviation},
                         {"mean_relative_deviation", s.mean_relative_deviation},
                         {"pass", ok}});
    if (res.summary.empty())
      res.summary = Json{{"n", n},
                         {"mean_count_over_n", s.mean_count_over_n},
                         {"mean_theta_integral", s.mean_theta_integral},
                         {"relative_gap", gap}};
  }
  res.results["per_n"] = per_n;
  return res;
}

KindResult run_design_audit(const ExperimentContext& ctx, OutputDir& out) {
  const ExperimentConfig& cfg = ctx.cfg;
  const double n = cfg.n.front();
  const TimeMesh mesh = ctx.mesh(n);
  const double tol = cfg.effective_tolerance();
  const MeanIntegralEstimate pilot = ctx.mean_f(mesh);

  std::vector<AuditCandidate> candidates;
  for (const auto& name : cfg.theta.candidates) {
    if (name == "min-std") {
      candidates.push_back({name, ctx.black_scholes() ? bs_min_std_theta(cfg.model.bs, cfg.theta.budget, pilot, n,
                                                                         cfg.theta.bounds)
                                                      : min_std_theta(ctx.f, cfg.theta.budget, pilot, n,
                                                                      cfg.theta.bounds)});
    } else if (name == "constant") {
      candidates.push_back({name, budget_constant_theta(cfg.theta.budget, n, ctx.horizon, cfg.theta.bounds)});
    } else {
      candidates.push_back({name, ctx.theta("no-bad-days", n, mesh, cfg.theta.c.front())});
    }
  }
  AuditSetup setup{ctx.model, ctx.integrand, ctx.f, mesh, n, cfg.theta.budget, cfg.pilot_paths, cfg.paths,
                   cfg.seed, cfg.jobs};
  const AuditTable table = optimality_audit(setup, candidates);

  KindResult res;
  Json rows = Json::array();
  const AuditRow* ms = nullptr;
  {
    CsvWriter w = out.csv("audit.csv", {"strategy", "scale", "count_pred", "count_real", "count_stderr",
                                        "variance_pred", "variance_real", "variance_stderr", "bound", "clamp_events"});
    for (const auto& r : table.rows) {
      if (r.strategy == "min-std") ms = &r;
      w.row(r.strategy, std::vector<double>{r.scale, r.count_pred, r.count_real, r.count_stderr, r.variance_pred,
                                            r.variance_real, r.variance_stderr, r.bound,
                                            static_cast<double>(r.clamp_events)});
    }
  }
  res.pass = ms != nullptr;
  for (const auto& r : table.rows) {
    Json row{{"strategy", r.strategy},
             {"scale", r.scale},
             {"count_pred", r.count_pred},
             {"count_real", r.count_real},
             {"count_stderr", r.count_stderr},
             {"variance_pred", r.variance_pred},
             {"variance_real", r.variance_real},
             {"variance_stderr", r.variance_stderr},
             {"bound", r.bound},
             {"ratio_to_bound", r.variance_real / r.bound},
             {"clamp_events", r.clamp_events}};
    if (ms && &r != ms) {
      const double se = std::hypot(r.variance_stderr, ms->variance_stderr);
      const double margin = (r.variance_real - ms->variance_real) / se;
      row["margin_over_min_std_in_stderr"] = margin;
      res.pass = res.pass && margin >= 3.0;
    }
    rows.push_back(row);
  }
  if (ms) {
    const double ratio = ms->variance_real / ms->bound;
    const double count_gap = std::abs(ms->count_real / cfg.theta.budget - 1.0);
    res.pass = res.pass && std::abs(ratio - 1.0) <= tol && count_gap <= 0.03;
    res.summary = Json{{"budget", cfg.theta.budget},
                       {"bound", ms->bound},
                       {"min_std_variance", ms->variance_real},
                       {"min_std_ratio", ratio},
                       {"min_std_count", ms->count_real}};
  }
  res.results = Json{{"n", n},
                     {"mesh_steps", mesh.steps},
                     {"pilot_mean_f", Json{{"value", pilot.value}, {"stderr", pilot.stderr}, {"paths", pilot.paths}}},
                     {"evaluation_mean_f", Json{{"value", table.mean_f.value}, {"stderr", table.mean_f.stderr}}},
                     {"budget", table.budget},
                     {"best_strategy", table.best_strategy},
                     {"rows", rows}};
  return res;
}

KindResult run_hedge(const ExperimentContext& ctx, OutputDir& out) {
  const ExperimentConfig& cfg = ctx.cfg;
  if (!ctx.black_scholes()) throw ConfigError("hedge experiments need the black-scholes model preset");
  const BsSpec& bs = cfg.model.bs;
  const double tol = cfg.effective_tolerance();
  KindResult res;
  res.pass = true;

  const DPlusMinus d0 = d_pm(bs, bs.S0, 0.0);
  const auto h0 = bs_hedge_vector(bs, bs.S0, 0.0);
  res.results["price"] = Json{{"S", bs.S0}, {"t", 0.0}, {"price", bs_price(bs, bs.S0, 0.0)}, {"d_plus", d0.plus},
                              {"d_minus", d0.minus}, {"hedge", {h0[0], h0[1]}}};
  res.summary["price"] = bs_price(bs, bs.S0, 0.0);

  if (!cfg.refinements.empty() && cfg.replication_paths > 0) {
    std::vector<std::uint64_t> levels = cfg.refinements;
    std::sort(levels.begin(), levels.end());
    const std::uint64_t finest = levels.back();
    for (auto s : levels)
      if (s == 0 || finest % s != 0) throw ConfigError("[run] refinements must divide the finest step count");
    const TimeMesh fine = TimeMesh::make(bs.V, finest);
    // replication paths follow the flatness ensemble in the path block
    const auto errs = parallel_map(cfg.replication_paths, cfg.jobs, [&](std::size_t r) {
      const BrownianPath b = simulate_brownian(fine, 2, path_seed(cfg.seed, cfg.paths + r));
      std::vector<double> e;
      for (auto s : levels) e.push_back(replication_sup_error(bs, simulate_sde(ctx.model, coarsen(b, finest / s))));
      return e;
    });
    Json lv = Json::array();
    std::vector<double> rms(levels.size(), 0.0);
    for (std::size_t l = 0; l < levels.size(); ++l) {
      for (const auto& e : errs) rms[l] += e[l] * e[l];
      rms[l] = std::sqrt(rms[l] / static_cast<double>(errs.size()));
    }
    CsvWriter w = out.csv("replication.csv", {"steps", "dt", "rms_sup_error", "ratio_to_next"});
    bool ok = true;
    for (std::size_t l = 0; l < levels.size(); ++l) {
      Json item{{"steps", levels[l]}, {"rms_sup_error", rms[l]}};
      double ratio = 0.0;
      if (l + 1 < levels.size()) {
        ratio = rms[l] / rms[l + 1];
        const double expect = std::sqrt(static_cast<double>(levels[l + 1]) / static_cast<double>(levels[l]));
        const bool good = std::abs(ratio / expect - 1.0) <= 0.2;
        item["ratio_to_next"] = ratio;
        item["expected_ratio"] = expect;
        item["pass"] = good;
        ok = ok && good;
      }
      w.row({static_cast<double>(levels[l]), bs.V / static_cast<double>(levels[l]), rms[l], ratio});
      lv.push_back(item);
    }
    res.results["replication"] = Json{{"paths", cfg.replication_paths}, {"levels", lv}, {"pass", ok}};
    res.summary["replication_rms_finest"] = rms.back();
    res.pass = res.pass && ok;
  }

  if (!cfg.theta.c.empty()) {
    const double n = cfg.n.front();
    const TimeMesh mesh = ctx.mesh(n);
    if (mesh.steps % cfg.bins != 0) throw ConfigError("[run] bins must divide mesh_steps");
    const std::size_t width = mesh.steps / cfg.bins;
    Json per_c = Json::array();
    std::vector<double> scaled;
    CsvWriter bw = out.csv("hedge_bins.csv", {"c", "bin", "t_start", "t_end", "variance", "variance_stderr"});
    CsvWriter sw = out.csv("hedge_summary.csv", {"c", "mean_U", "var_U", "var_U_stderr", "predicted_var",
                                                 "max_min_ratio", "mean_N", "N_stderr", "clamp_events"});
    bool flat = true;
    for (double c : cfg.theta.c) {
      const ThetaSpec theta = bs_no_bad_days_theta(bs, c, cfg.theta.bounds);
      struct Row {
        std::vector<double> edges;
        double count;
        std::size_t clamps;
      };
      const auto rows = parallel_map(cfg.paths, cfg.jobs, [&](std::size_t k) {
        const PathBundle b = simulate_bundle(ctx.model, mesh, path_seed(cfg.seed, k));
        const RandomGrid g = build_grid(theta, n, b.state, ctx.horizon);
        const std::vector<double> u = euler_error(ctx.integrand, b.state, g);
        Row r{std::vector<double>(cfg.bins + 1), static_cast<double>(intervention_count(g)),
              g.clamp_low + g.clamp_high};
        for (std::size_t e = 0; e <= cfg.bins; ++e) r.edges[e] = u[e * width];
        return r;
      });
      if (c == cfg.theta.c.front()) write_first_path(ctx, out, n, mesh, theta);
      std::vector<std::vector<double>> edges;
      std::vector<double> terminal, counts;
      std::size_t clamps = 0;
      for (const auto& r : rows) {
        edges.push_back(r.edges);
        terminal.push_back(r.edges.back());
        counts.push_back(r.count);
        clamps += r.clamps;
      }
      const BinProfile prof = binned_variance_profile(edges, cfg.bins);
      const Moments mt = moments(terminal), mc = moments(counts);
      const bool ok = prof.max_min_ratio >= 0.8 && prof.max_min_ratio <= 1.25;
      flat = flat && ok;
      scaled.push_back(mt.variance * c);
      for (std::size_t b = 0; b < cfg.bins; ++b)
        bw.row({c, static_cast<double>(b), mesh.time(b * width), mesh.time((b + 1) * width), prof.variance[b],
                prof.stderr_variance[b]});
      sw.row({c, mt.mean, mt.variance, mt.stderr_variance, ctx.horizon / c, prof.max_min_ratio, mc.mean,
              mc.stderr_mean, static_cast<double>(clamps)});
      per_c.push_back(Json{{"c", c},
                           {"bin_variance", prof.variance},
                           {"bin_variance_stderr", prof.stderr_variance},
                           {"max_min_ratio", prof.max_min_ratio},
                           {"terminal", moments_json(mt)},
                           {"predicted_variance", ctx.horizon / c},
                           {"mean_count", mc.mean},
                           {"count_stderr", mc.stderr_mean},
                           {"clamp_events", clamps},
                           {"flat", ok}});
    }
    double spread = 0.0;
    for (double s : scaled) spread = std::max(spread, std::abs(s / scaled.front() - 1.0));
    const bool scales = spread <= tol;
    res.results["no_bad_days"] = Json{{"n", n},
                                      {"mesh_steps", mesh.steps},
                                      {"bins", cfg.bins},
                                      {"per_c", per_c},
                                      {"scaling_spread", spread},
                                      {"flat", flat},
                                      {"scales_as_inverse_c", scales}};
    res.summary["scaling_spread"] = spread;
    res.pass = res.pass && flat && scales;
  }
  return res;
}

KindResult run_lemma_psi(const ExperimentContext& ctx, OutputDir& out) {
  const ExperimentConfig& cfg = ctx.cfg;
  if (cfg.model.preset != "brownian" || cfg.model.dim != 1)
    throw ConfigError("lemma-psi runs on the one-dimensional brownian preset");
  const double tol = cfg.effective_tolerance();
  const PathFunctional weight = [a = cfg.psi_weight](const AdaptedView&) { return a; };
  KindResult res;
  Json per_n = Json::array();
  std::vector<double> p95s;
  for (double n : cfg.n) {
    const TimeMesh mesh = ctx.mesh(n);
    const ThetaSpec theta = ctx.theta(n, mesh);
    const auto reps = parallel_map(cfg.paths, cfg.jobs, [&](std::size_t k) {
      const BrownianPath b = simulate_brownian(mesh, 1, path_seed(cfg.seed, k));
      return psi_functional(weight, theta, b, build_grid(theta, n, b.path, ctx.horizon), cfg.psi_p);
    });
    std::vector<double> sup, lhs, rhs;
    {
      CsvWriter w = out.csv("psi_" + tag(n) + ".csv", {"path", "sup_deviation", "lhs_T", "rhs_T"});
      for (std::size_t k = 0; k < reps.size(); ++k) {
        sup.push_back(reps[k].sup_deviation);
        lhs.push_back(reps[k].lhs_terminal);
        rhs.push_back(reps[k].rhs_terminal);
        w.row({static_cast<double>(k), reps[k].sup_deviation, reps[k].lhs_terminal, reps[k].rhs_terminal});
      }
    }
    const double p95 = quantile(sup, 0.95);
    p95s.push_back(p95);
    per_n.push_back(Json{{"n", n},
                         {"mesh_steps", mesh.steps},
                         {"p95_sup_deviation", p95},
                         {"mean_sup_deviation", moments(sup).mean},
                         {"mean_lhs_T", moments(lhs).mean},
                         {"mean_rhs_T", moments(rhs).mean}});
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < p95s.size(); ++i) decreasing = decreasing && p95s[i] < p95s[i - 1];
  const bool below = cfg.psi_p != 2 || p95s.front() < tol;
  res.results = Json{{"p", cfg.psi_p}, {"target_E_p", cfg.psi_p == 1 ? kE1 : kE2}, {"per_n", per_n},
                     {"decreasing", decreasing}, {"first_below_tolerance", below}};
  res.summary = Json{{"p95_first", p95s.front()}, {"p95_last", p95s.back()}};
  res.pass = decreasing && below;
  return res;
}

// Runner -------------------------------------------------------------------------

Json manifest_json(const std::vector<ManifestEntry>& m) {
  Json a = Json::array();
  for (const auto& e : m) a.push_back(Json{{"file", e.file}, {"bytes", e.bytes}, {"fnv1a64", e.fnv1a64}});
  return a;
}

KindResult dispatch(const ExperimentContext& ctx, OutputDir& out) {
  switch (ctx.cfg.kind) {
    case ExperimentKind::convergence: return run_convergence(ctx, out);
    case ExperimentKind::limit_compare: return run_limit_compare(ctx, out);
    case ExperimentKind::count_asymptotics: return run_count_asymptotics(ctx, out);
    case ExperimentKind::design_audit: return run_design_audit(ctx, out);
    case ExperimentKind::hedge: return run_hedge(ctx, out);
    case ExperimentKind::lemma_psi: return run_lemma_psi(ctx, out);
  }
  throw ConfigError("unknown experiment kind");
}

}  // namespace

RunReport run(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  OutputDir out(cfg.out);
  KindResult kr;
  try {
    const ExperimentContext ctx(cfg);
    kr = dispatch(ctx, out);
  } catch (const Error&) {
    std::throw_with_nested(ExperimentError("experiment '" + std::string(to_string(cfg.kind)) +
                                           (cfg.label.empty() ? "" : "/" + cfg.label) +
                                           "' with seed " + std::to_string(cfg.seed) + " failed"));
  }

  RunReport r;
  r.out = cfg.out;
  r.pass = kr.pass;
  r.report["tool"] = "stochgrid";
  r.report["format"] = 1;
  r.report["config"] = config_echo(cfg);
  r.report["pass"] = kr.pass;
  r.report["summary"] = kr.summary;
  r.report["results"] = kr.results;
  r.report["files"] = manifest_json(out.manifest());
  out.write_text("report.json", r.report.dump(2) + "\n");
  r.manifest = out.manifest();
  out.write_text("manifest.json", manifest_json(r.manifest).dump(2) + "\n", false);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.write_text("timing.json", Json{{"seconds", r.seconds}, {"jobs", cfg.jobs}}.dump(2) + "\n", false);
  return r;
}

// Sweeps --------------------------------------------------------------------------

namespace {

std::pair<std::string, std::string> split_axis(const std::string& axis) {
  const auto dot = axis.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == axis.size())
    throw ConfigError("sweep axis must be written section.key, got '" + axis + "'");
  return {axis.substr(0, dot), axis.substr(dot + 1)};
}

/// Section contents without line numbers and without keys that may vary freely.
std::map<std::string, std::map<std::string, std::string>> comparable(const ConfigFile& f,
                                                                          const std::string& section,
                                                                          const std::string& key) {
  std::map<std::string, std::map<std::string, std::string>> out;
  for (const auto& [s, entries] : f.sections())
    for (const auto& [k, e] : entries) {
      if ((s == section && k == key) || (s == "run" && (k == "out" || k == "jobs" || k == "label"))) continue;
      out[s][k] = e.value;
    }
  return out;
}

}  // namespace

std::vector<ConfigFile> expand_axis(const ConfigFile& base, const std::string& axis,
                                           const std::vector<std::string>& values) {
  const auto [section, key] = split_axis(axis);
  std::vector<ConfigFile> out;
  for (const auto& v : values) {
    ConfigFile c = base;
    c.set(section, key, v);
    out.push_back(std::move(c));
  }
  return out;
}



SweepResult sweep(const std::vector<ConfigFile>& configs, const std::string& axis,
                         const std::filesystem::path& out_root, std::optional<std::uint64_t> seed, unsigned jobs) {
  if (configs.empty()) throw ConfigError("sweep needs at least one config");
  const auto [section, key] = split_axis(axis);
  const auto reference = comparable(configs.front(), section, key);
  for (std::size_t i = 0; i < configs.size(); ++i) {
    if (!configs[i].has(section, key))
      throw ConfigError(configs[i].origin() + ": sweep axis '" + axis + "' is not set");
    if (comparable(configs[i], section, key) != reference)
      throw ConfigError(configs[i].origin() + ": differs from the first config outside the axis '" + axis + "'");
  }

  OutputDir root(out_root);
  SweepResult res;
  res.pass = true;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> axis_values;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    ConfigFile f = configs[i];
    if (seed) f.set("run", "seed", std::to_string(*seed));
    ExperimentConfig cfg = experiment_from(f);
    cfg.jobs = jobs;
    cfg.out = out_root / ("run_" + std::to_string(i));
    RunReport r = run(cfg);
    if (columns.empty())
      for (const auto& [k, v] : r.report["summary"].items()) columns.push_back(k);
    std::vector<double> row{r.pass ? 1.0 : 0.0};
    for (const auto& c : columns) {
      const Json& v = r.report["summary"].contains(c) ? r.report["summary"][c] : Json();
      row.push_back(v.is_number() ? v.get<double>() : NAN);
    }
    rows.push_back(std::move(row));
    axis_values.push_back(f.text(section, key, ""));
    res.pass = res.pass && r.pass;
    res.runs.push_back(std::move(r));
  }
  std::vector<std::string> header{axis, "pass"};
  header.insert(header.end(), columns.begin(), columns.end());
  {
    CsvWriter w = root.csv("sweep.csv", header);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::string value = axis_values[i];
      // a list value would break the column layout
      std::replace(value.begin(), value.end(), ',', ' ');
      w.row(value, rows[i]);
    }
  }
  res.csv = root.root() / "sweep.csv";
  return res;
}

}  // namespace stochgrid
