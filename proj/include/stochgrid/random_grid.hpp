// SPDX-License-Identifier: Apache-2.0
#pragma once

// Random evaluation grids  tau_{k+1} = min(tau_k + 1 / (n theta(tau_k)), T)
// driven by an adapted intensity process theta, and the step map eta_n.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "stochgrid/errors.hpp"
#include "stochgrid/path_engine.hpp"

namespace stochgrid {

/// Read-only window on a sampled path that exposes only the history up to
/// mesh point `index`. Reading a later point is an adaptedness violation.
class AdaptedView {
public:
  AdaptedView(const SampledPath& path, std::size_t index) : path_(&path), index_(index) {}

  std::size_t index() const noexcept { return index_; }
  double t() const noexcept { return path_->mesh.time(index_); }
  std::size_t dim() const noexcept { return path_->dim; }
  std::span<const double> state() const noexcept { return path_->at(index_); }
  double operator[](std::size_t c) const noexcept { return (*path_)(index_, c); }

  std::span<const double> state_at(std::size_t j) const {
    if (j > index_) throw AdaptednessError("path functional read mesh point " + std::to_string(j) +
                                           " while evaluating at " + std::to_string(index_));
    return path_->at(j);
  }
  double time_at(std::size_t j) const noexcept { return path_->mesh.time(j); }

private:
  const SampledPath* path_;
  std::size_t index_;
};

/// Path functional evaluated at a mesh point using history up to that point.
using PathFunctional = std::function<double(const AdaptedView&)>;

enum class ThetaKind { constant, path_functional, no_bad_days, min_std, black_scholes_nbd, black_scholes_minstd };

inline const char* to_string(ThetaKind k) noexcept {
  switch (k) {
    case ThetaKind::constant: return "constant";
    case ThetaKind::path_functional: return "path-functional";
    case ThetaKind::no_bad_days: return "no-bad-days";
    case ThetaKind::min_std: return "min-std";
    case ThetaKind::black_scholes_nbd: return "black-scholes-nbd";
    case ThetaKind::black_scholes_minstd: return "black-scholes-minstd";
  }
  return "unknown";
}

struct ClampBounds {
  double lower = 1e-3;
  double upper = 1e3;
};

struct ThetaValue {
  double value;
  int clamped;  ///< -1 raised to the lower bound, +1 cut to the upper bound, 0 untouched
};

struct ThetaSpec {
  ThetaKind kind = ThetaKind::constant;
  PathFunctional evaluator;
  ClampBounds bounds;
  std::string label;

  void validate() const {
    if (!evaluator) throw ConfigError("intensity evaluator is not set");
    if (!(bounds.lower > 0.0) || !(bounds.upper >= bounds.lower) || !std::isfinite(bounds.upper))
      throw ConfigError("intensity clamp bounds must satisfy 0 < lower <= upper < inf");
  }

  ThetaValue evaluate(const AdaptedView& view) const {
    const double raw = evaluator(view);
    if (!std::isfinite(raw))
      throw AdaptednessError("intensity evaluator returned a non-finite value at t = " + std::to_string(view.t()));
    if (raw < bounds.lower) return {bounds.lower, -1};
    if (raw > bounds.upper) return {bounds.upper, 1};
    return {raw, 0};
  }
};

inline ThetaSpec constant_theta(double value, ClampBounds bounds = {}) {
  return {ThetaKind::constant, [value](const AdaptedView&) { return value; }, bounds, "constant"};
}

/// Deterministic intensity theta(t).
inline ThetaSpec deterministic_theta(std::function<double(double)> fn, ClampBounds bounds = {}) {
  return {ThetaKind::path_functional, [fn = std::move(fn)](const AdaptedView& v) { return fn(v.t()); }, bounds,
          "deterministic"};
}

inline ThetaSpec path_theta(PathFunctional fn, ClampBounds bounds = {}, std::string label = "path-functional") {
  return {ThetaKind::path_functional, std::move(fn), bounds, std::move(label)};
}

struct RandomGrid {
  double n = 1.0;
  double horizon = 1.0;
  TimeMesh mesh;
  std::vector<double> taus;          ///< tau_0 = 0 < tau_1 < ... ; the last entry equals horizon
  std::vector<std::size_t> snapped;  ///< first mesh index at or after each tau
  std::vector<std::size_t> mesh_eta; ///< for mesh point i, the snapped index of the last grid point at or before i
  std::size_t clamp_low = 0;
  std::size_t clamp_high = 0;
};

namespace detail {

inline std::size_t snap_up(double tau, const TimeMesh& mesh) {
  const double pos = tau / mesh.dt();
  const double idx = std::ceil(pos - 1e-9 * std::max(1.0, pos));
  return std::min(mesh.steps, static_cast<std::size_t>(std::max(0.0, idx)));
}

}  // namespace detail

inline RandomGrid build_grid(const ThetaSpec& theta, double n, const SampledPath& path, double horizon) {
  theta.validate();
  if (!(n >= 1.0)) throw ConfigError("grid scale n must be at least 1");
  const TimeMesh& mesh = path.mesh;
  if (!(horizon > 0.0) || horizon > mesh.horizon * (1.0 + 1e-12))
    throw ConfigError("grid horizon must lie in (0, mesh horizon]");

  RandomGrid g;
  g.n = n;
  g.horizon = horizon;
  g.mesh = mesh;
  const double close = horizon * 1e-12;
  double tau = 0.0;
  g.taus.push_back(0.0);
  g.snapped.push_back(0);
  while (tau < horizon) {
    const std::size_t idx = g.snapped.back();
    const ThetaValue th = theta.evaluate(AdaptedView(path, idx));
    if (th.clamped < 0) ++g.clamp_low;
    if (th.clamped > 0) ++g.clamp_high;
    double next = tau + 1.0 / (n * th.value);
    if (next >= horizon - close) next = horizon;
    g.taus.push_back(next);
    g.snapped.push_back(detail::snap_up(next, mesh));
    tau = next;
  }

  g.mesh_eta.resize(mesh.points());
  std::size_t k = 0;
  for (std::size_t i = 0; i < mesh.points(); ++i) {
    while (k + 1 < g.snapped.size() && g.snapped[k + 1] <= i) ++k;
    g.mesh_eta[i] = g.snapped[k];
  }
  return g;
}

inline RandomGrid build_grid(const ThetaSpec& theta, double n, const StatePath& path, double horizon) {
  return build_grid(theta, n, path.path, horizon);
}

/// Last grid point at or before t; at t = T the last point strictly before T.
inline double eta(const RandomGrid& grid, double t) {
  if (!(t >= 0.0) || t > grid.horizon) throw DomainError("eta evaluated outside [0, T]");
  // taus.back() == horizon is the cap, not an evaluation time
  const auto last = grid.taus.end() - 1;
  auto it = std::upper_bound(grid.taus.begin(), last, t);
  return *(it - 1);
}

/// Number of evaluation times tau_k < T, counting tau_0.
inline std::size_t intervention_count(const RandomGrid& grid) {
  return static_cast<std::size_t>(
      std::count_if(grid.taus.begin(), grid.taus.end(), [&](double t) { return t < grid.horizon; }));
}

/// Clamped intensity at every mesh point up to `horizon`.
inline std::vector<double> theta_on_mesh(const ThetaSpec& theta, const SampledPath& path) {
  std::vector<double> out(path.mesh.points());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = theta.evaluate(AdaptedView(path, i)).value;
  return out;
}

/// Trapezoid integral of mesh samples over [0, T].
inline double trapezoid(std::span<const double> values, double dt) {
  if (values.size() < 2) return 0.0;
  double s = 0.5 * (values.front() + values.back());
  for (std::size_t i = 1; i + 1 < values.size(); ++i) s += values[i];
  return s * dt;
}

struct CountAsymptotics {
  std::vector<double> count_over_n;     ///< N / n per path
  std::vector<double> theta_integral;   ///< int_0^T theta dt per path
  std::vector<double> relative_deviation;
  double mean_count_over_n = 0.0;
  double mean_theta_integral = 0.0;
  double max_relative_deviation = 0.0;
  double mean_relative_deviation = 0.0;
};

struct PathCount {
  double count_over_n;
  double theta_integral;
};

inline PathCount count_for_path(const ThetaSpec& theta, double n, const SampledPath& path) {
  const RandomGrid g = build_grid(theta, n, path, path.mesh.horizon);
  const auto th = theta_on_mesh(theta, path);
  return {static_cast<double>(intervention_count(g)) / n, trapezoid(th, path.mesh.dt())};
}

inline CountAsymptotics summarize_counts(std::span<const PathCount> per_path) {
  CountAsymptotics r;
  for (const auto& p : per_path) {
    const double dev = std::abs(p.count_over_n - p.theta_integral) / p.theta_integral;
    r.count_over_n.push_back(p.count_over_n);
    r.theta_integral.push_back(p.theta_integral);
    r.relative_deviation.push_back(dev);
    r.mean_count_over_n += p.count_over_n;
    r.mean_theta_integral += p.theta_integral;
    r.mean_relative_deviation += dev;
    r.max_relative_deviation = std::max(r.max_relative_deviation, dev);
  }
  if (!per_path.empty()) {
    const double m = static_cast<double>(per_path.size());
    r.mean_count_over_n /= m;
    r.mean_theta_integral /= m;
    r.mean_relative_deviation /= m;
  }
  return r;
}

/// Compares N_n / n with the intensity integral on every path of the ensemble.
inline CountAsymptotics check_count_asymptotics(const ThetaSpec& theta, std::span<const StatePath> paths, double n) {
  std::vector<PathCount> per_path;
  per_path.reserve(paths.size());
  for (const auto& p : paths) per_path.push_back(count_for_path(theta, n, p.path));
  return summarize_counts(per_path);
}

}  // namespace stochgrid
