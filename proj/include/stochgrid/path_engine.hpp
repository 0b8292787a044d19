// SPDX-License-Identifier: Apache-2.0
#pragma once

// Seeded Brownian paths on a uniform mesh and Euler-Maruyama solutions of
//   dY = alpha(Y) dt + beta(Y) dB,   dY_i = alpha_i dt + sum_k beta(i, k) dB_k.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stochgrid/errors.hpp"
#include "stochgrid/rng.hpp"

namespace stochgrid {

struct TimeMesh {
  double horizon = 1.0;
  std::size_t steps = 1;

  static TimeMesh make(double horizon, std::size_t steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("mesh horizon must be positive and finite");
    if (steps == 0) throw ConfigError("mesh needs at least one step");
    return TimeMesh{horizon, steps};
  }

  double dt() const noexcept { return horizon / static_cast<double>(steps); }
  double time(std::size_t i) const noexcept {
    return i == steps ? horizon : static_cast<double>(i) * dt();
  }
  std::size_t points() const noexcept { return steps + 1; }

  friend bool operator==(const TimeMesh&, const TimeMesh&) = default;
};

/// Smallest mesh on [0, T] giving every random-grid interval at least `kappa`
/// steps when the intensity never exceeds `theta_max`.
inline TimeMesh mesh_for_grid(double horizon, double n, double theta_max, std::size_t kappa = 16) {
  if (!(n >= 1.0) || !(theta_max > 0.0) || kappa == 0) throw ConfigError("invalid mesh resolution request");
  const double steps = std::ceil(static_cast<double>(kappa) * n * theta_max * horizon - 1e-9);
  return TimeMesh::make(horizon, static_cast<std::size_t>(std::max(1.0, steps)));
}

/// Row-major samples of a d-dimensional path at every mesh point.
struct SampledPath {
  TimeMesh mesh;
  std::size_t dim = 1;
  std::vector<double> values;

  SampledPath() = default;
  SampledPath(TimeMesh m, std::size_t d) : mesh(m), dim(d), values(m.points() * d, 0.0) {}

  std::span<const double> at(std::size_t i) const noexcept { return {values.data() + i * dim, dim}; }
  std::span<double> at(std::size_t i) noexcept { return {values.data() + i * dim, dim}; }
  double operator()(std::size_t i, std::size_t c) const noexcept { return values[i * dim + c]; }

  /// Copy of coordinate c as a scalar path.
  std::vector<double> coordinate(std::size_t c) const {
    std::vector<double> out(mesh.points());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*this)(i, c);
    return out;
  }
};

struct BrownianPath {
  SampledPath path;
  SeedRecord seed;

  const TimeMesh& mesh() const noexcept { return path.mesh; }
  std::size_t dim() const noexcept { return path.dim; }
};

using VectorField = std::function<void(std::span<const double> x, std::span<double> out)>;

struct SdeSpec {
  std::string name;
  std::size_t dim = 1;
  VectorField drift;      ///< writes alpha(x), length d
  VectorField diffusion;  ///< writes beta(x) row-major, d x d
  std::vector<double> initial;
  /// Caller's assertion that the linear-growth and Lipschitz bounds hold.
  bool growth_condition_declared = false;

  void validate() const {
    if (dim == 0) throw ConfigError("SDE dimension must be at least 1");
    if (!drift || !diffusion) throw ConfigError("SDE coefficients are not set");
    if (initial.size() != dim) throw ConfigError("initial state has wrong dimension");
  }
};

struct StatePath {
  SampledPath path;
  SeedRecord seed;  ///< seed of the driving Brownian path
  std::string model;

  const TimeMesh& mesh() const noexcept { return path.mesh; }
  std::size_t dim() const noexcept { return path.dim; }
};

/// A driving Brownian path together with the SDE solution it produced.
struct PathBundle {
  BrownianPath brownian;
  StatePath state;
};

inline BrownianPath simulate_brownian(const TimeMesh& mesh, std::size_t d, const SeedRecord& seed) {
  TimeMesh::make(mesh.horizon, mesh.steps);
  if (d == 0) throw ConfigError("Brownian dimension must be at least 1");
  BrownianPath out{SampledPath(mesh, d), seed};
  GaussianStream gauss(seed);
  const double sd = std::sqrt(mesh.dt());
  auto& v = out.path.values;
  for (std::size_t i = 0; i < mesh.steps; ++i) {
    const double* prev = v.data() + i * d;
    double* next = v.data() + (i + 1) * d;
    for (std::size_t c = 0; c < d; ++c) next[c] = prev[c] + sd * gauss();
  }
  return out;
}

inline StatePath simulate_sde(const SdeSpec& spec, const BrownianPath& bpath) {
  spec.validate();
  const std::size_t d = spec.dim;
  if (bpath.dim() != d) throw ConfigError("SDE dimension does not match Brownian dimension");
  const TimeMesh& mesh = bpath.mesh();
  StatePath out{SampledPath(mesh, d), bpath.seed, spec.name};
  auto& y = out.path.values;
  std::copy(spec.initial.begin(), spec.initial.end(), y.begin());

  std::vector<double> alpha(d), beta(d * d);
  const double dt = mesh.dt();
  for (std::size_t i = 0; i < mesh.steps; ++i) {
    std::span<const double> x{y.data() + i * d, d};
    spec.drift(x, alpha);
    spec.diffusion(x, beta);
    const double* b0 = bpath.path.values.data() + i * d;
    const double* b1 = b0 + d;
    double* next = y.data() + (i + 1) * d;
    for (std::size_t r = 0; r < d; ++r) {
      double acc = x[r] + alpha[r] * dt;
      for (std::size_t k = 0; k < d; ++k) acc += beta[r * d + k] * (b1[k] - b0[k]);
      if (!std::isfinite(acc)) throw NumericError("non-finite SDE state in model '" + spec.name + "'", i + 1);
      next[r] = acc;
    }
  }
  return out;
}

inline PathBundle simulate_bundle(const SdeSpec& spec, const TimeMesh& mesh, const SeedRecord& seed) {
  PathBundle b{simulate_brownian(mesh, spec.dim, seed), {}};
  b.state = simulate_sde(spec, b.brownian);
  return b;
}

/// Brownian path restricted to every `factor`-th mesh point. Exact in law.
inline BrownianPath coarsen(const BrownianPath& fine, std::size_t factor) {
  if (factor == 0 || fine.mesh().steps % factor != 0) throw ConfigError("coarsening factor must divide the step count");
  const TimeMesh coarse = TimeMesh::make(fine.mesh().horizon, fine.mesh().steps / factor);
  BrownianPath out{SampledPath(coarse, fine.dim()), fine.seed};
  for (std::size_t i = 0; i < coarse.points(); ++i) {
    auto src = fine.path.at(i * factor);
    std::copy(src.begin(), src.end(), out.path.at(i).begin());
  }
  return out;
}

// Model presets -------------------------------------------------------------

inline SdeSpec brownian_model(std::size_t d = 1, std::vector<double> initial = {}) {
  if (initial.empty()) initial.assign(d, 0.0);
  SdeSpec s;
  s.name = "brownian";
  s.dim = d;
  s.drift = [](std::span<const double>, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); };
  s.diffusion = [d](std::span<const double>, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < d; ++i) out[i * d + i] = 1.0;
  };
  s.initial = std::move(initial);
  s.growth_condition_declared = true;
  return s;
}

/// Independent geometric Brownian motions: dY_i = mu Y_i dt + sigma Y_i dB_i.
inline SdeSpec gbm_model(double mu, double sigma, std::vector<double> initial = {1.0}) {
  const std::size_t d = initial.size();
  SdeSpec s;
  s.name = "gbm";
  s.dim = d;
  s.drift = [mu](std::span<const double> x, std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = mu * x[i];
  };
  s.diffusion = [sigma, d](std::span<const double> x, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < d; ++i) out[i * d + i] = sigma * x[i];
  };
  s.initial = std::move(initial);
  s.growth_condition_declared = true;
  return s;
}

/// Constant coefficients: Y(t) = Y(0) + alpha t + beta B(t).
inline SdeSpec constant_model(std::vector<double> alpha, std::vector<double> beta, std::vector<double> initial) {
  const std::size_t d = initial.size();
  if (alpha.size() != d || beta.size() != d * d) throw ConfigError("constant model coefficient sizes");
  SdeSpec s;
  s.name = "constant";
  s.dim = d;
  s.drift = [alpha](std::span<const double>, std::span<double> out) { std::copy(alpha.begin(), alpha.end(), out.begin()); };
  s.diffusion = [beta](std::span<const double>, std::span<double> out) { std::copy(beta.begin(), beta.end(), out.begin()); };
  s.initial = std::move(initial);
  s.growth_condition_declared = true;
  return s;
}

}  // namespace stochgrid
