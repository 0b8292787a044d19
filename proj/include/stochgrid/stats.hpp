// SPDX-License-Identifier: Apache-2.0
#pragma once

// Distributional comparisons used by the verification experiments.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "stochgrid/errors.hpp"

namespace stochgrid {

struct SampleSet {
  std::vector<double> values;
  std::string label;
  std::string provenance;  ///< seed and size record of the producing run

  void validate() const {
    if (values.empty()) throw InsufficientDataError("sample set '" + label + "' is empty");
    for (double v : values)
      if (!std::isfinite(v)) throw NumericError("sample set '" + label + "' holds a non-finite value", 0);
  }
};

struct Moments {
  std::size_t count = 0;
  double mean = 0.0;
  double variance = 0.0;         ///< unbiased
  double stderr_mean = 0.0;
  double stderr_variance = 0.0;  ///< from the fourth central moment
};

inline Moments moments(std::span<const double> x) {
  Moments m;
  m.count = x.size();
  if (x.empty()) return m;
  const double n = static_cast<double>(x.size());
  for (double v : x) m.mean += v;
  m.mean /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double c = v - m.mean;
    const double c2 = c * c;
    m2 += c2;
    m4 += c2 * c2;
  }
  if (x.size() > 1) m.variance = m2 / (n - 1.0);
  m.stderr_mean = std::sqrt(m.variance / n);
  const double pop2 = m2 / n;
  m.stderr_variance = std::sqrt(std::max(0.0, m4 / n - pop2 * pop2) / n);
  return m;
}

/// Linear-interpolated sample quantile, q in [0, 1].
inline double quantile(std::vector<double> x, double q) {
  if (x.empty()) throw InsufficientDataError("quantile of an empty sample");
  std::sort(x.begin(), x.end());
  const double pos = q * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (pos - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
  const Moments ma = moments(a), mb = moments(b);
  double c = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) c += (a[i] - ma.mean) * (b[i] - mb.mean);
  c /= static_cast<double>(a.size()) - 1.0;
  const double den = std::sqrt(ma.variance * mb.variance);
  return den > 0.0 ? c / den : 0.0;
}

/// Asymptotic critical coefficient c(alpha) = sqrt(-ln(alpha / 2) / 2); c(0.01) = 1.628.
inline double ks_coefficient(double alpha) { return std::sqrt(-0.5 * std::log(0.5 * alpha)); }

/// Survival function of the Kolmogorov distribution.
inline double kolmogorov_sf(double lambda) {
  if (lambda < 0.2) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

struct ComparisonReport {
  std::string label_a, label_b;
  double ks_statistic = 0.0;
  double critical_value = 0.0;
  double alpha = 0.01;
  double p_value = 1.0;
  Moments moments_a, moments_b;
  bool pass = false;
};

inline ComparisonReport ks_two_sample(const SampleSet& a, const SampleSet& b, double alpha = 0.01) {
  a.validate();
  b.validate();
  if (a.values.size() < 100 || b.values.size() < 100)
    throw InsufficientDataError("two-sample KS needs at least 100 values per set");
  std::vector<double> xa = a.values, xb = b.values;
  std::sort(xa.begin(), xa.end());
  std::sort(xb.begin(), xb.end());
  const double na = static_cast<double>(xa.size()), nb = static_cast<double>(xb.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < xa.size() && j < xb.size()) {
    const double v = std::min(xa[i], xb[j]);
    while (i < xa.size() && xa[i] == v) ++i;
    while (j < xb.size() && xb[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }

  ComparisonReport r;
  r.label_a = a.label;
  r.label_b = b.label;
  r.ks_statistic = d;
  r.alpha = alpha;
  r.critical_value = ks_coefficient(alpha) * std::sqrt((na + nb) / (na * nb));
  const double ne = na * nb / (na + nb);
  r.p_value = kolmogorov_sf((std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d);
  r.moments_a = moments(a.values);
  r.moments_b = moments(b.values);
  r.pass = d <= r.critical_value;
  return r;
}

struct IndependenceReport {
  std::size_t paths = 0;
  double r_linear = 0.0;  ///< corr(u, y)
  double r_square = 0.0;  ///< corr(u, y^2)
  double bound = 0.0;     ///< 3 / sqrt(paths)
  bool pass_linear = false;
  bool pass_square = false;
  bool pass = false;
};

inline IndependenceReport independence_check(const SampleSet& u, const SampleSet& y) {
  u.validate();
  y.validate();
  if (u.values.size() != y.values.size()) throw ConfigError("independence check needs paired samples");
  if (u.values.size() < 1000) throw InsufficientDataError("independence check needs at least 1000 pairs");
  IndependenceReport r;
  r.paths = u.values.size();
  r.bound = 3.0 / std::sqrt(static_cast<double>(r.paths));
  std::vector<double> y2(y.values.size());
  std::transform(y.values.begin(), y.values.end(), y2.begin(), [](double v) { return v * v; });
  r.r_linear = pearson(u.values, y.values);
  r.r_square = pearson(u.values, y2);
  r.pass_linear = std::abs(r.r_linear) <= r.bound;
  r.pass_square = std::abs(r.r_square) <= r.bound;
  r.pass = r.pass_linear && r.pass_square;
  return r;
}

struct BinProfile {
  std::vector<std::size_t> boundaries;
  std::vector<double> variance;
  std::vector<double> stderr_variance;
  double max_min_ratio = 0.0;
};

/// Variance of path increments over `bins` consecutive time bins. Paths are
/// sampled on a common uniform mesh; bin edges are mesh points.
inline BinProfile binned_variance_profile(std::span<const std::vector<double>> paths, std::size_t bins) {
  if (bins < 2) throw ConfigError("binned variance profile needs at least two bins");
  if (paths.empty()) throw InsufficientDataError("binned variance profile of an empty ensemble");
  const std::size_t steps = paths.front().size() - 1;
  if (paths.front().size() < 2 || bins > steps) throw ConfigError("more bins than mesh steps");
  BinProfile p;
  for (std::size_t b = 0; b <= bins; ++b) p.boundaries.push_back(b * steps / bins);
  std::vector<double> inc(paths.size());
  for (std::size_t b = 0; b < bins; ++b) {
    for (std::size_t k = 0; k < paths.size(); ++k) {
      if (paths[k].size() != steps + 1) throw ConfigError("ensemble paths have different lengths");
      inc[k] = paths[k][p.boundaries[b + 1]] - paths[k][p.boundaries[b]];
    }
    const Moments m = moments(inc);
    p.variance.push_back(m.variance);
    p.stderr_variance.push_back(m.stderr_variance);
  }
  const auto [lo, hi] = std::minmax_element(p.variance.begin(), p.variance.end());
  p.max_min_ratio = *lo > 0.0 ? *hi / *lo : (*hi > 0.0 ? INFINITY : 1.0);
  return p;
}

/// Terminal pairs (Y(T), U(T)) from one ensemble.
struct PairedSample {
  std::vector<double> y;
  std::vector<double> u;
  std::string configuration;  ///< model / integrand / design fingerprint
  std::string label;
};

struct JointLawReport {
  std::vector<ComparisonReport> subtests;  ///< y, u, u + y, u - y (standardized)
  double alpha = 0.01;
  double alpha_per_test = 0.0025;
  bool pass = false;
};

/// Joint-law comparison of two paired ensembles: KS on each marginal and on
/// the projections z(u) +- z(y), standardized with pooled moments, each at a
/// Bonferroni-corrected level.
inline JointLawReport joint_law_check(const PairedSample& n, const PairedSample& star, double alpha = 0.01) {
  if (n.configuration != star.configuration)
    throw AuditError("joint law check on ensembles from different configurations");
  if (n.y.size() != n.u.size() || star.y.size() != star.u.size()) throw ConfigError("unpaired joint-law samples");
  if (n.y.size() < 5000 || star.y.size() < 5000) throw InsufficientDataError("joint law check needs 5000 pairs per set");

  auto pooled = [](const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> all(a);
    all.insert(all.end(), b.begin(), b.end());
    return moments(all);
  };
  const Moments my = pooled(n.y, star.y), mu = pooled(n.u, star.u);
  const double sy = std::sqrt(my.variance) > 0 ? std::sqrt(my.variance) : 1.0;
  const double su = std::sqrt(mu.variance) > 0 ? std::sqrt(mu.variance) : 1.0;
  auto project = [&](const PairedSample& s, double sign) {
    std::vector<double> out(s.y.size());
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = (s.u[i] - mu.mean) / su + sign * (s.y[i] - my.mean) / sy;
    return out;
  };

  JointLawReport r;
  r.alpha = alpha;
  r.alpha_per_test = alpha / 4.0;
  const std::string a = n.label.empty() ? "approximation" : n.label;
  const std::string b = star.label.empty() ? "limit" : star.label;
  r.subtests.push_back(ks_two_sample({n.y, a + ":y", {}}, {star.y, b + ":y", {}}, r.alpha_per_test));
  r.subtests.push_back(ks_two_sample({n.u, a + ":u", {}}, {star.u, b + ":u", {}}, r.alpha_per_test));
  r.subtests.push_back(ks_two_sample({project(n, 1.0), a + ":u+y", {}}, {project(star, 1.0), b + ":u+y", {}},
                                     r.alpha_per_test));
  r.subtests.push_back(ks_two_sample({project(n, -1.0), a + ":u-y", {}}, {project(star, -1.0), b + ":u-y", {}},
                                     r.alpha_per_test));
  r.pass = std::all_of(r.subtests.begin(), r.subtests.end(), [](const ComparisonReport& c) { return c.pass; });
  return r;
}

}  // namespace stochgrid
