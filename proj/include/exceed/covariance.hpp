#pragma once

// Isotropic covariance models: Matern (with the 2*sqrt(nu) range scaling),
// stable temporal covariance, and the separable space-time product.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "exceed/data_model.hpp"
#include "exceed/special_functions.hpp"

namespace exceed {

/// Matern parameters: sigma is the variance (C(0) = sigma), rho the range, nu
/// the smoothness.
///
///   C(h) = sigma / (2^(nu-1) Gamma(nu)) * u^nu * K_nu(u),  u = 2 sqrt(nu) h / rho
///
/// In the parameterisation without the 2 sqrt(nu) factor, C(h) = sigma *
/// M_nu(h / phi), the range is phi = rho / (2 sqrt(nu)).
struct MaternParams {
  double sigma = 1.0;
  double rho = 1.0;
  double nu = 0.5;
};

inline void validate(const MaternParams& p) {
  const auto ok = [](double v) { return std::isfinite(v) && v > 0.0; };
  require(ok(p.sigma) && ok(p.rho) && ok(p.nu),
          "Matern parameters must be positive and finite (sigma=" + std::to_string(p.sigma) +
              ", rho=" + std::to_string(p.rho) + ", nu=" + std::to_string(p.nu) + ")");
}

namespace detail {

// Correlation u^nu K_nu(u) / (2^(nu-1) Gamma(nu)) at scaled distance u > 0,
// given the precomputed log normaliser.
inline double matern_unit(double u, double nu, double log_norm) {
  if (u > 700.0) return 0.0;  // K_nu(u) ~ e^-u underflows
  return std::exp(log_norm + nu * std::log(u)) * bessel_k(nu, u);
}

inline double matern_log_norm(double nu) {
  return -((nu - 1.0) * std::log(2.0) + std::lgamma(nu));
}

}  // namespace detail

/// Matern correlation (sigma = 1) at distance h.
inline double matern_correlation(double h, double rho, double nu) {
  require(h >= 0.0, "matern: distance must be non-negative");
  if (h == 0.0) return 1.0;
  const double u = 2.0 * std::sqrt(nu) * h / rho;
  return std::min(1.0, detail::matern_unit(u, nu, detail::matern_log_norm(nu)));
}

inline double matern_cov(double h, const MaternParams& p) {
  validate(p);
  return p.sigma * matern_correlation(h, p.rho, p.nu);
}

/// Parameters of C(u, h) = sigma_T2 exp(-u^alpha) * sigma_S2 * 2^(1-gamma)/Gamma(gamma) h^gamma K_gamma(h).
/// Defaults are the reference simulation scenario.
struct SeparableCovParams {
  double sigma_T2 = 0.7;
  double alpha = 0.2;
  double sigma_S2 = 1.3;
  double gamma = 0.5;
};

inline void validate(const SeparableCovParams& p) {
  require(std::isfinite(p.sigma_T2) && p.sigma_T2 > 0.0, "sigma_T2 must be positive");
  require(std::isfinite(p.sigma_S2) && p.sigma_S2 > 0.0, "sigma_S2 must be positive");
  require(p.alpha > 0.0 && p.alpha <= 2.0, "alpha must lie in (0, 2]");
  require(std::isfinite(p.gamma) && p.gamma > 0.0, "gamma must be positive");
}

inline double stable_temporal_cov(double u, double sigma_T2, double alpha) {
  require(u >= 0.0, "temporal lag must be non-negative");
  require(std::isfinite(sigma_T2) && sigma_T2 > 0.0, "sigma_T2 must be positive");
  require(alpha > 0.0 && alpha <= 2.0, "alpha must lie in (0, 2]");
  if (u == 0.0) return sigma_T2;
  return sigma_T2 * std::exp(-std::pow(u, alpha));
}

/// Whittle-Matern spatial factor, unscaled distance (no 2 sqrt(nu) factor).
inline double whittle_matern_cov(double h, double sigma_S2, double gamma) {
  require(h >= 0.0, "distance must be non-negative");
  require(std::isfinite(sigma_S2) && sigma_S2 > 0.0, "sigma_S2 must be positive");
  require(std::isfinite(gamma) && gamma > 0.0, "gamma must be positive");
  if (h == 0.0) return sigma_S2;
  return sigma_S2 * std::min(1.0, detail::matern_unit(h, gamma, detail::matern_log_norm(gamma)));
}

inline double separable_cov(double u, double h, const SeparableCovParams& p) {
  validate(p);
  return stable_temporal_cov(u, p.sigma_T2, p.alpha) * whittle_matern_cov(h, p.sigma_S2, p.gamma);
}

/// Pairwise distances of a point set, reduced to the distinct values so that a
/// covariance matrix costs one kernel evaluation per distinct distance.
class DistanceTable {
public:
  explicit DistanceTable(std::span<const Location> points) : n_(points.size()) {
    std::vector<double> d;
    d.reserve(n_ * (n_ - (n_ > 0)) / 2);
    for (std::size_t j = 0; j < n_; ++j)
      for (std::size_t i = j + 1; i < n_; ++i) d.push_back(distance(points[i], points[j]));
    unique_ = d;
    std::sort(unique_.begin(), unique_.end());
    unique_.erase(std::unique(unique_.begin(), unique_.end()), unique_.end());
    index_.resize(d.size());
    for (std::size_t k = 0; k < d.size(); ++k) {
      index_[k] = static_cast<std::uint32_t>(
          std::lower_bound(unique_.begin(), unique_.end(), d[k]) - unique_.begin());
    }
  }

  std::size_t size() const noexcept { return n_; }
  const std::vector<double>& unique_distances() const noexcept { return unique_; }

  double min_distance() const { return unique_.empty() ? 0.0 : unique_.front(); }
  double max_distance() const { return unique_.empty() ? 0.0 : unique_.back(); }

  /// Symmetric matrix with diag on the diagonal and f(h) off it.
  template <class F>
  Eigen::MatrixXd matrix(double diag, F&& f) const {
    std::vector<double> vals(unique_.size());
    for (std::size_t k = 0; k < unique_.size(); ++k) vals[k] = f(unique_[k]);
    Eigen::MatrixXd m(n_, n_);
    std::size_t k = 0;
    for (std::size_t j = 0; j < n_; ++j) {
      m(j, j) = diag;
      for (std::size_t i = j + 1; i < n_; ++i, ++k) {
        m(i, j) = m(j, i) = vals[index_[k]];
      }
    }
    return m;
  }

private:
  std::size_t n_;
  std::vector<double> unique_;
  std::vector<std::uint32_t> index_;
};

/// Matern correlation matrix over a distance table.
inline Eigen::MatrixXd matern_correlation_matrix(const DistanceTable& table, double rho, double nu) {
  const double scale = 2.0 * std::sqrt(nu) / rho;
  const double log_norm = detail::matern_log_norm(nu);
  return table.matrix(1.0, [&](double h) {
    if (h == 0.0) return 1.0;
    return std::min(1.0, detail::matern_unit(scale * h, nu, log_norm));
  });
}

}  // namespace exceed
