// SPDX-License-Identifier: Apache-2.0
#pragma once

// Limit of the scaled Euler error: U* = sum_{k,m} int Delta_{k,m} dW_{k,m},
// with W a d x d Brownian array independent of the driving path and
//   Delta = beta^T J beta / sqrt(2 theta),   J(i, j) = d f_i / d x_j.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "stochgrid/error_process.hpp"
#include "stochgrid/errors.hpp"
#include "stochgrid/path_engine.hpp"
#include "stochgrid/random_grid.hpp"
#include "stochgrid/rng.hpp"

namespace stochgrid {

struct DeltaField {
  TimeMesh mesh;
  std::size_t dim = 1;
  std::vector<double> values;  ///< d x d row-major block per mesh point
  SeedRecord path_seed;
  std::size_t clamp_low = 0;
  std::size_t clamp_high = 0;

  std::span<const double> at(std::size_t i) const noexcept { return {values.data() + i * dim * dim, dim * dim}; }
};

/// beta^T J beta at one state; the theta-free part of Delta. `scratch` is
/// resized as needed and may be reused across calls.
inline void error_coefficients(const IntegrandSpec& f, const SdeSpec& spec, double t, std::span<const double> x,
                               std::span<double> out, std::vector<double>& scratch) {
  const std::size_t d = spec.dim;
  scratch.resize(3 * d * d);
  std::span<double> jac{scratch.data(), d * d}, beta{scratch.data() + d * d, d * d},
      tmp{scratch.data() + 2 * d * d, d * d};
  f.jacobian_at(t, x, jac);
  spec.diffusion(x, beta);
  // tmp = J beta
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t m = 0; m < d; ++m) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += jac[i * d + j] * beta[j * d + m];
      tmp[i * d + m] = s;
    }
  for (std::size_t k = 0; k < d; ++k)
    for (std::size_t m = 0; m < d; ++m) {
      double s = 0.0;
      for (std::size_t i = 0; i < d; ++i) s += beta[i * d + k] * tmp[i * d + m];
      out[k * d + m] = s;
    }
}

inline DeltaField delta_field(const IntegrandSpec& f, const SdeSpec& spec, const ThetaSpec& theta,
                              const StatePath& y) {
  f.validate();
  spec.validate();
  theta.validate();
  const std::size_t d = spec.dim;
  if (y.dim() != d || f.dim != d) throw ConfigError("delta field dimensions disagree");
  const TimeMesh& mesh = y.mesh();
  DeltaField out{mesh, d, std::vector<double>(mesh.points() * d * d), y.seed};
  std::vector<double> block(d * d), scratch;
  for (std::size_t i = 0; i < mesh.points(); ++i) {
    const ThetaValue th = theta.evaluate(AdaptedView(y.path, i));
    if (th.clamped < 0) ++out.clamp_low;
    if (th.clamped > 0) ++out.clamp_high;
    error_coefficients(f, spec, mesh.time(i), y.path.at(i), block, scratch);
    const double scale = 1.0 / std::sqrt(2.0 * th.value);
    for (std::size_t k = 0; k < d * d; ++k) {
      const double v = block[k] * scale;
      if (!std::isfinite(v)) throw NumericError("non-finite delta field", i);
      out.values[i * d * d + k] = v;
    }
  }
  return out;
}

/// sum_{k,m} int Delta_{k,m}^2 dt as a left-endpoint sum: the exact variance of
/// the discrete limit sample for deterministic Delta.
inline double delta_energy(const DeltaField& delta) {
  const double dt = delta.mesh.dt();
  double s = 0.0;
  for (std::size_t i = 0; i < delta.mesh.steps; ++i)
    for (double v : delta.at(i)) s += v * v * dt;
  return s;
}

struct LimitSample {
  std::vector<double> u_star;
  SeedRecord w_seed;
};

namespace detail {

inline void check_limit_seed(const DeltaField& delta, const SeedRecord& w_seed) {
  if (w_seed == delta.path_seed) throw ConfigError("limit Brownian stream collides with the path stream");
  if (stream_role(w_seed.substream) != StreamRole::limit)
    throw ConfigError("limit Brownian stream must come from the limit substream block");
}

}  // namespace detail

/// Left-endpoint Ito sum of Delta against a fresh d x d Brownian array.
inline LimitSample sample_limit(const DeltaField& delta, const SeedRecord& w_seed) {
  detail::check_limit_seed(delta, w_seed);
  const std::size_t dd = delta.dim * delta.dim;
  const double sd = std::sqrt(delta.mesh.dt());
  GaussianStream gauss(w_seed);
  LimitSample out{std::vector<double>(delta.mesh.points(), 0.0), w_seed};
  for (std::size_t i = 0; i < delta.mesh.steps; ++i) {
    const double* dv = delta.values.data() + i * dd;
    double acc = 0.0;
    for (std::size_t k = 0; k < dd; ++k) acc += dv[k] * (sd * gauss());
    out.u_star[i + 1] = out.u_star[i] + acc;
  }
  return out;
}

/// Same law via one Brownian motion: int sqrt(sum_{k,m} Delta_{k,m}^2) dW.
inline LimitSample sample_limit_collapsed(const DeltaField& delta, const SeedRecord& w_seed) {
  detail::check_limit_seed(delta, w_seed);
  const std::size_t dd = delta.dim * delta.dim;
  const double sd = std::sqrt(delta.mesh.dt());
  GaussianStream gauss(w_seed);
  LimitSample out{std::vector<double>(delta.mesh.points(), 0.0), w_seed};
  for (std::size_t i = 0; i < delta.mesh.steps; ++i) {
    const double* dv = delta.values.data() + i * dd;
    double sq = 0.0;
    for (std::size_t k = 0; k < dd; ++k) sq += dv[k] * dv[k];
    out.u_star[i + 1] = out.u_star[i] + std::sqrt(sq) * (sd * gauss());
  }
  return out;
}

/// sup_t |x(t)| over the samples.
inline double sup_statistic(std::span<const double> path) {
  double m = 0.0;
  for (double v : path) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace stochgrid
