// SPDX-License-Identifier: Apache-2.0
#pragma once

// Discrete stochastic integrals on the mesh and the scaled Euler error
//   U^n(t)    = lambda_n sum_i int_0^t (f_i(Y) - f_i(Y o eta_n)) dY_i
//   Z^n_ij(t) = lambda_n int_0^t (Y_j - Y_j o eta_n) dY_i
// with lambda_n = sqrt(n). All integrals are left-endpoint sums against the
// full mesh increments of Y, drift part included.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "stochgrid/errors.hpp"
#include "stochgrid/path_engine.hpp"
#include "stochgrid/random_grid.hpp"
#include "stochgrid/rng.hpp"

namespace stochgrid {

using TimeVectorField = std::function<void(double t, std::span<const double> x, std::span<double> out)>;

/// Integrand f = (f_1, ..., f_d) of the approximated integral sum_i int f_i(Y) dY_i.
/// The jacobian (row-major, J(i, j) = d f_i / d x_j) is optional; without it
/// central finite differences are used.
struct IntegrandSpec {
  std::string name;
  std::size_t dim = 1;
  TimeVectorField value;
  TimeVectorField jacobian;

  void validate() const {
    if (dim == 0 || !value) throw ConfigError("integrand is not set");
  }

  void jacobian_at(double t, std::span<const double> x, std::span<double> out) const {
    if (jacobian) {
      jacobian(t, x, out);
      return;
    }
    finite_difference_jacobian(t, x, out);
  }

  void finite_difference_jacobian(double t, std::span<const double> x, std::span<double> out) const {
    const std::size_t d = dim;
    std::vector<double> xp(x.begin(), x.end()), fp(d), fm(d);
    for (std::size_t j = 0; j < d; ++j) {
      const double h = 1e-6 * (1.0 + std::abs(x[j]));
      xp[j] = x[j] + h;
      value(t, xp, fp);
      xp[j] = x[j] - h;
      value(t, xp, fm);
      xp[j] = x[j];
      for (std::size_t i = 0; i < d; ++i) out[i * d + j] = (fp[i] - fm[i]) / (2.0 * h);
    }
  }
};

/// Largest relative discrepancy between the closed-form jacobian and central
/// differences over the given states.
inline double jacobian_consistency(const IntegrandSpec& f, double t, std::span<const std::vector<double>> states) {
  if (!f.jacobian) return 0.0;
  const std::size_t d = f.dim;
  std::vector<double> exact(d * d), approx(d * d);
  double worst = 0.0;
  for (const auto& x : states) {
    f.jacobian(t, x, exact);
    f.finite_difference_jacobian(t, x, approx);
    for (std::size_t k = 0; k < d * d; ++k)
      worst = std::max(worst, std::abs(exact[k] - approx[k]) / std::max(1.0, std::abs(exact[k])));
  }
  return worst;
}

inline IntegrandSpec identity_integrand(std::size_t d = 1) {
  return {"identity", d,
          [](double, std::span<const double> x, std::span<double> out) { std::copy(x.begin(), x.end(), out.begin()); },
          [d](double, std::span<const double>, std::span<double> out) {
            std::fill(out.begin(), out.end(), 0.0);
            for (std::size_t i = 0; i < d; ++i) out[i * d + i] = 1.0;
          }};
}

inline IntegrandSpec square_integrand(std::size_t d = 1) {
  return {"square", d,
          [](double, std::span<const double> x, std::span<double> out) {
            for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * x[i];
          },
          [d](double, std::span<const double> x, std::span<double> out) {
            std::fill(out.begin(), out.end(), 0.0);
            for (std::size_t i = 0; i < d; ++i) out[i * d + i] = 2.0 * x[i];
          }};
}

inline IntegrandSpec sine_integrand(std::size_t d = 1) {
  return {"sine", d,
          [](double, std::span<const double> x, std::span<double> out) {
            for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::sin(x[i]);
          },
          [d](double, std::span<const double> x, std::span<double> out) {
            std::fill(out.begin(), out.end(), 0.0);
            for (std::size_t i = 0; i < d; ++i) out[i * d + i] = std::cos(x[i]);
          }};
}

struct ErrorSample {
  double n = 1.0;
  std::size_t dim = 1;
  std::vector<double> U;  ///< one value per mesh point
  std::vector<double> Z;  ///< d x d row-major block per mesh point
};

namespace detail {

inline void check_alignment(const StatePath& y, const RandomGrid& grid) {
  if (!(grid.mesh == y.mesh())) throw ConfigError("grid was built on a different mesh");
  if (std::abs(grid.horizon - y.mesh().horizon) > 1e-12 * y.mesh().horizon)
    throw ConfigError("error processes need the grid horizon to equal the mesh horizon");
}

}  // namespace detail

/// Cumulative left-endpoint sum  sum_i H(t_i) (X(t_{i+1}) - X(t_i)), zero at t_0.
inline std::vector<double> ito_sum(std::span<const double> integrand, std::span<const double> integrator) {
  if (integrand.size() != integrator.size() || integrand.empty())
    throw ConfigError("integrand and integrator live on different meshes");
  std::vector<double> out(integrand.size(), 0.0);
  for (std::size_t i = 0; i + 1 < out.size(); ++i)
    out[i + 1] = out[i] + integrand[i] * (integrator[i + 1] - integrator[i]);
  return out;
}

/// f(t_i, Y(t_i)) at every mesh point, row-major.
inline std::vector<double> integrand_on_mesh(const IntegrandSpec& f, const StatePath& y) {
  f.validate();
  const std::size_t d = y.dim();
  if (f.dim != d) throw ConfigError("integrand dimension does not match the state");
  const TimeMesh& mesh = y.mesh();
  std::vector<double> out(mesh.points() * d);
  for (std::size_t i = 0; i < mesh.points(); ++i) {
    std::span<double> dst{out.data() + i * d, d};
    f.value(mesh.time(i), y.path.at(i), dst);
    for (double v : dst)
      if (!std::isfinite(v)) throw NumericError("non-finite integrand value", i);
  }
  return out;
}

/// Euler error from precomputed integrand values (see integrand_on_mesh), so
/// several grids on one path share a single integrand evaluation.
inline std::vector<double> euler_error(std::span<const double> f_values, const StatePath& y, const RandomGrid& grid,
                                       double lambda) {
  detail::check_alignment(y, grid);
  const std::size_t d = y.dim();
  const TimeMesh& mesh = y.mesh();
  if (f_values.size() != mesh.points() * d) throw ConfigError("integrand values live on a different mesh");
  std::vector<double> u(mesh.points(), 0.0);
  for (std::size_t i = 0; i < mesh.steps; ++i) {
    const double* fe = f_values.data() + grid.mesh_eta[i] * d;
    const double* fi = f_values.data() + i * d;
    const double* x0 = y.path.values.data() + i * d;
    const double* x1 = x0 + d;
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c) acc += (fi[c] - fe[c]) * (x1[c] - x0[c]);
    u[i + 1] = u[i] + lambda * acc;
  }
  return u;
}

inline std::vector<double> euler_error(const IntegrandSpec& f, const StatePath& y, const RandomGrid& grid,
                                       double lambda) {
  return euler_error(integrand_on_mesh(f, y), y, grid, lambda);
}

inline std::vector<double> euler_error(const IntegrandSpec& f, const StatePath& y, const RandomGrid& grid) {
  return euler_error(f, y, grid, std::sqrt(grid.n));
}

inline std::vector<double> z_process(const StatePath& y, const RandomGrid& grid, double lambda) {
  detail::check_alignment(y, grid);
  const std::size_t d = y.dim();
  const TimeMesh& mesh = y.mesh();
  std::vector<double> z(mesh.points() * d * d, 0.0);
  for (std::size_t i = 0; i < mesh.steps; ++i) {
    const std::size_t e = grid.mesh_eta[i];
    const double* xe = y.path.values.data() + e * d;
    const double* x0 = y.path.values.data() + i * d;
    const double* x1 = x0 + d;
    const double* z0 = z.data() + i * d * d;
    double* z1 = z.data() + (i + 1) * d * d;
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b)
        z1[a * d + b] = z0[a * d + b] + lambda * ((x0[b] - xe[b]) * (x1[a] - x0[a]));
  }
  return z;
}

inline std::vector<double> z_process(const StatePath& y, const RandomGrid& grid) {
  return z_process(y, grid, std::sqrt(grid.n));
}

inline ErrorSample error_sample(const IntegrandSpec& f, const StatePath& y, const RandomGrid& grid) {
  return {grid.n, y.dim(), euler_error(f, y, grid), z_process(y, grid)};
}

struct IdentityDeviation {
  double max_abs = 0.0;
  double relative = 0.0;  ///< max_abs / sup |U|
};

/// Difference quotient g(x, y) = (f(x) - f(y)) / (x - y), with f'(x) near the diagonal.
inline double divided_difference(double fx, double fy, double x, double y, double fprime_x) {
  if (std::abs(x - y) < 1e-8 * (1.0 + std::abs(x))) return fprime_x;
  return (fx - fy) / (x - y);
}

/// Checks U^n = int g(Y, Y o eta_n) dZ^n on the mesh (d = 1).
inline IdentityDeviation theorem_identity(const IntegrandSpec& f, const StatePath& y, const RandomGrid& grid,
                                          double lambda) {
  if (y.dim() != 1 || f.dim != 1) throw UnsupportedError("the discrete error identity is implemented for d = 1");
  detail::check_alignment(y, grid);
  const std::vector<double> u = euler_error(f, y, grid, lambda);
  const TimeMesh& mesh = y.mesh();
  const auto& x = y.path.values;
  double fi = 0.0, fe = 0.0, jac = 0.0, via_z = 0.0, sup_u = 0.0;
  IdentityDeviation dev;
  for (std::size_t i = 0; i < mesh.steps; ++i) {
    const std::size_t e = grid.mesh_eta[i];
    f.value(mesh.time(i), {&x[i], 1}, {&fi, 1});
    f.value(mesh.time(e), {&x[e], 1}, {&fe, 1});
    f.jacobian_at(mesh.time(i), {&x[i], 1}, {&jac, 1});
    const double g = divided_difference(fi, fe, x[i], x[e], jac);
    const double dz = lambda * ((x[i] - x[e]) * (x[i + 1] - x[i]));
    via_z += g * dz;
    dev.max_abs = std::max(dev.max_abs, std::abs(u[i + 1] - via_z));
    sup_u = std::max(sup_u, std::abs(u[i + 1]));
  }
  dev.relative = sup_u > 0.0 ? dev.max_abs / sup_u : dev.max_abs;
  return dev;
}

inline IdentityDeviation theorem_identity(const IntegrandSpec& f, const StatePath& y, const RandomGrid& grid) {
  return theorem_identity(f, y, grid, std::sqrt(grid.n));
}

// E_p = E int_0^1 B(s)^p ds
inline constexpr double kE1 = 0.0;
inline constexpr double kE2 = 0.5;

struct PsiReport {
  double sup_deviation = 0.0;
  double lhs_terminal = 0.0;  ///< int_0^T psi_n ds
  double rhs_terminal = 0.0;  ///< E_p int_0^T a / theta^{p/2} ds
};

/// Compares int_0^t psi_n ds with E_p int_0^t a(s) / theta(s)^{p/2} ds, where
///   psi_n(t) = n^{p/2} a(tau_k) (B(t) - B(tau_k))^p  on [tau_k, tau_{k+1}),
/// and returns the supremum over mesh points of the difference. Both integrals
/// use the trapezoid rule, with psi's left limit at block ends.
inline PsiReport psi_functional(const PathFunctional& a, const ThetaSpec& theta, const BrownianPath& b,
                                const RandomGrid& grid, int p) {
  if (p != 1 && p != 2) throw UnsupportedError("psi functional is defined for p = 1, 2");
  if (!(grid.mesh == b.mesh())) throw ConfigError("grid was built on a different mesh");
  const TimeMesh& mesh = b.mesh();
  const double ep = p == 1 ? kE1 : kE2;
  const double scale = std::pow(grid.n, 0.5 * p);
  const double dt = mesh.dt();
  auto bv = [&](std::size_t i) { return b.path(i, 0); };
  auto pw = [p](double v) { return p == 1 ? v : v * v; };
  auto target = [&](std::size_t i) {
    const AdaptedView view(b.path, i);
    const double th = theta.evaluate(view).value;
    return a(view) / (p == 1 ? std::sqrt(th) : th);
  };

  PsiReport r;
  double lhs = 0.0, rhs = 0.0, a_block = 0.0;
  double target_left = target(0);
  std::size_t cached = static_cast<std::size_t>(-1);
  for (std::size_t i = 0; i < mesh.steps; ++i) {
    const std::size_t e = grid.mesh_eta[i];
    if (e != cached) {
      a_block = a(AdaptedView(b.path, e));
      cached = e;
    }
    const double left = scale * a_block * pw(bv(i) - bv(e));
    const double right = scale * a_block * pw(bv(i + 1) - bv(e));
    lhs += 0.5 * dt * (left + right);
    const double target_right = target(i + 1);
    rhs += 0.5 * dt * ep * (target_left + target_right);
    target_left = target_right;
    r.sup_deviation = std::max(r.sup_deviation, std::abs(lhs - rhs));
  }
  r.lhs_terminal = lhs;
  r.rhs_terminal = rhs;
  return r;
}

}  // namespace stochgrid
