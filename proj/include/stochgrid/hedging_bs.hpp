// SPDX-License-Identifier: Apache-2.0
#pragma once

// Discrete hedging of a European call in the Black-Scholes market.
//
// State Y = (S, R) with dS = mu S dt + sigma S dB, dR = r R dt, R(0) = 1. The
// hedge f = (Phi(d+), -Phi(d-) K e^{-rT}) replicates the call price
//   Pi(t) = Phi(d+) S - K e^{-r(T-t)} Phi(d-)
// as the self-financing integral int f(Y) dY. All hedging experiments stop at
// a truncation time V < T, where the grid intensities stay bounded.

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "stochgrid/error_process.hpp"
#include "stochgrid/errors.hpp"
#include "stochgrid/grid_design.hpp"
#include "stochgrid/path_engine.hpp"
#include "stochgrid/random_grid.hpp"

namespace stochgrid {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) * (std::numbers::inv_sqrtpi / std::numbers::sqrt2); }

struct BsSpec {
  double S0 = 100.0;
  double K = 100.0;
  double r = 0.0;
  double mu = 0.05;
  double sigma = 0.2;
  double T = 1.0;
  double V = 0.95;

  /// Truncation at 95% of maturity.
  static BsSpec with_default_truncation(double S0, double K, double r, double mu, double sigma, double T) {
    return {S0, K, r, mu, sigma, T, 0.95 * T};
  }

  void validate() const {
    if (!(sigma > 0.0) || !(S0 > 0.0) || !(K > 0.0)) throw ConfigError("Black-Scholes parameters need sigma, S0, K > 0");
    if (!(T > 0.0) || !(V > 0.0) || !(V < T)) throw ConfigError("truncation time must satisfy 0 < V < T");
    if (!std::isfinite(r) || !std::isfinite(mu)) throw ConfigError("rate and drift must be finite");
  }
};

struct DPlusMinus {
  double plus;
  double minus;
};

inline DPlusMinus d_pm(const BsSpec& s, double S, double t) {
  if (!(t < s.T)) throw DomainError("d+- evaluated at or after maturity");
  if (!(S > 0.0)) throw DomainError("d+- needs a positive price");
  const double tau = s.T - t;
  const double vol = s.sigma * std::sqrt(tau);
  const double lm = std::log(S / s.K);
  const double half = 0.5 * s.sigma * s.sigma;
  return {(lm + (s.r + half) * tau) / vol, (lm + (s.r - half) * tau) / vol};
}

inline double bs_price(const BsSpec& s, double S, double t) {
  const DPlusMinus d = d_pm(s, S, t);
  return normal_cdf(d.plus) * S - s.K * std::exp(-s.r * (s.T - t)) * normal_cdf(d.minus);
}

/// Holdings in (S, R): (Phi(d+), -Phi(d-) K e^{-rT}).
inline std::array<double, 2> bs_hedge_vector(const BsSpec& s, double S, double t) {
  const DPlusMinus d = d_pm(s, S, t);
  return {normal_cdf(d.plus), -normal_cdf(d.minus) * s.K * std::exp(-s.r * s.T)};
}

inline SdeSpec bs_model(const BsSpec& spec) {
  spec.validate();
  SdeSpec m;
  m.name = "black-scholes";
  m.dim = 2;
  m.drift = [mu = spec.mu, r = spec.r](std::span<const double> x, std::span<double> out) {
    out[0] = mu * x[0];
    out[1] = r * x[1];
  };
  m.diffusion = [sigma = spec.sigma](std::span<const double> x, std::span<double> out) {
    out[0] = sigma * x[0];
    out[1] = 0.0;
    out[2] = 0.0;
    out[3] = 0.0;
  };
  m.initial = {spec.S0, 1.0};
  m.growth_condition_declared = true;
  return m;
}

/// The hedge as an integrand of the (S, R) system, with its closed-form jacobian.
inline IntegrandSpec bs_integrand(const BsSpec& spec) {
  spec.validate();
  IntegrandSpec f;
  f.name = "bs-hedge";
  f.dim = 2;
  f.value = [spec](double t, std::span<const double> x, std::span<double> out) {
    const auto h = bs_hedge_vector(spec, x[0], t);
    out[0] = h[0];
    out[1] = h[1];
  };
  f.jacobian = [spec](double t, std::span<const double> x, std::span<double> out) {
    const DPlusMinus d = d_pm(spec, x[0], t);
    const double denom = x[0] * spec.sigma * std::sqrt(spec.T - t);
    out[0] = normal_pdf(d.plus) / denom;
    out[1] = 0.0;
    out[2] = -spec.K * std::exp(-spec.r * spec.T) * normal_pdf(d.minus) / denom;
    out[3] = 0.0;
  };
  return f;
}

namespace detail {

inline void check_truncation(const BsSpec& s, double t) {
  if (t > s.V * (1.0 + 1e-12)) throw TruncationError("hedging quantity requested after the truncation time V");
}

}  // namespace detail

/// phi(d+) sigma S / sqrt(2 (T - t)): the error density of the hedge.
inline double bs_error_density(const BsSpec& s, double S, double t) {
  detail::check_truncation(s, t);
  return normal_pdf(d_pm(s, S, t).plus) * s.sigma * S / std::sqrt(2.0 * (s.T - t));
}

inline FProcess bs_f_process(const BsSpec& spec) {
  return [spec](const AdaptedView& v) { return bs_error_density(spec, v[0], v.t()); };
}

/// Limit integrand of the scaled hedging error: phi(d+) sigma S / sqrt(2 theta (T - t)).
inline double bs_error_integrand(const BsSpec& s, double theta, double S, double t) {
  detail::check_truncation(s, t);
  return normal_pdf(d_pm(s, S, t).plus) * s.sigma * S / std::sqrt(2.0 * theta * (s.T - t));
}

inline double bs_error_integrand(const BsSpec& s, const ThetaSpec& theta, const AdaptedView& v) {
  return bs_error_integrand(s, theta.evaluate(v).value, v[0], v.t());
}

/// theta = c phi(d+)^2 sigma^2 S^2 / (2 (T - t)).
inline ThetaSpec bs_no_bad_days_theta(const BsSpec& spec, double c, ClampBounds bounds = {}) {
  ThetaSpec t = no_bad_days_theta(bs_f_process(spec), c, bounds);
  t.kind = ThetaKind::black_scholes_nbd;
  t.label = "black-scholes-nbd";
  return t;
}

/// theta = C f / (n int_0^V E f ds) with the hedge's error density f.
inline ThetaSpec bs_min_std_theta(const BsSpec& spec, double budget, const MeanIntegralEstimate& mean_f, double n,
                                  ClampBounds bounds = {}) {
  ThetaSpec t = min_std_theta(bs_f_process(spec), budget, mean_f, n, bounds);
  t.kind = ThetaKind::black_scholes_minstd;
  t.label = "black-scholes-minstd";
  return t;
}

/// sup over mesh points of |int f(Y) dY - (Pi(t) - Pi(0))| for a path on [0, V].
inline double replication_sup_error(const BsSpec& spec, const StatePath& y) {
  if (y.mesh().horizon > spec.V * (1.0 + 1e-12)) throw TruncationError("replication path runs past V");
  const TimeMesh& mesh = y.mesh();
  const IntegrandSpec f = bs_integrand(spec);
  const std::vector<double> fv = integrand_on_mesh(f, y);
  const double pi0 = bs_price(spec, y.path(0, 0), 0.0);
  double portfolio = 0.0, worst = 0.0;
  for (std::size_t i = 0; i < mesh.steps; ++i) {
    portfolio += fv[2 * i] * (y.path(i + 1, 0) - y.path(i, 0)) + fv[2 * i + 1] * (y.path(i + 1, 1) - y.path(i, 1));
    const double target = bs_price(spec, y.path(i + 1, 0), mesh.time(i + 1)) - pi0;
    worst = std::max(worst, std::abs(portfolio - target));
  }
  return worst;
}

}  // namespace stochgrid
