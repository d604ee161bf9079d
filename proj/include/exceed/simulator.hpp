#pragma once

// Exact simulation of zero-mean separable space-time Gaussian fields:
// X = L_S E L_T^T with L_S, L_T the Cholesky factors of the spatial and
// temporal covariance matrices and E iid standard normal, so that
// Cov(X(s_i, t_k), X(s_j, t_l)) = C_S(|s_i - s_j|) C_T(|k - l|).

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "exceed/covariance.hpp"
#include "exceed/data_model.hpp"
#include "exceed/error.hpp"
#include "exceed/kriging.hpp"
#include "exceed/rng.hpp"
#include "exceed/special_functions.hpp"

namespace exceed {

struct SimScenario {
  GridSpec grid{20, 20, {0.0, 0.0}, 1.0};
  std::vector<Location> extra_sites;  // off-grid points simulated jointly with the grid
  std::size_t n_time = 200;
  SeparableCovParams cov{};
  std::uint64_t seed = 0;
  std::function<double(double)> transform;          // optional strictly increasing G
  std::function<double(double)> inverse_transform;  // G^-1, needed by true_exceedance
  std::size_t max_points = 4000;

  std::size_t point_count() const { return grid.cell_count() + extra_sites.size(); }
};

/// Grid cells (x fastest) followed by the extra sites.
inline std::vector<Location> scenario_points(const SimScenario& sc) {
  auto pts = sc.grid.cells();
  pts.insert(pts.end(), sc.extra_sites.begin(), sc.extra_sites.end());
  return pts;
}

class FieldSimulator {
public:
  explicit FieldSimulator(const SimScenario& sc) : scenario_(sc) {
    validate(sc.grid);
    validate(sc.cov);
    for (const auto& s : sc.extra_sites) validate(s);
    require(sc.n_time >= 1, "simulate: n_time must be positive");
    const std::size_t np = sc.point_count();
    if (np > sc.max_points) {
      throw ValidationError("simulate: " + std::to_string(np) + " spatial points exceed the budget of " +
                            std::to_string(sc.max_points));
    }

    const auto pts = scenario_points(sc);
    const DistanceTable table(pts);
    Eigen::MatrixXd cs = table.matrix(sc.cov.sigma_S2, [&](double h) {
      return whittle_matern_cov(h, sc.cov.sigma_S2, sc.cov.gamma);
    });
    auto ls = detail::jittered_cholesky(std::move(cs), sc.cov.sigma_S2);
    if (!ls) {
      throw NumericalError("simulate: spatial covariance not positive definite; " + detail::closest_pair(pts));
    }
    ls_ = ls->matrixL();

    const std::size_t n = sc.n_time;
    Eigen::MatrixXd ct(n, n);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t l = 0; l < n; ++l)
        ct(k, l) = stable_temporal_cov(static_cast<double>(k > l ? k - l : l - k), sc.cov.sigma_T2, sc.cov.alpha);
    auto lt = detail::jittered_cholesky(std::move(ct), sc.cov.sigma_T2);
    if (!lt) throw NumericalError("simulate: temporal covariance not positive definite");
    lt_ = lt->matrixL();
  }

  const SimScenario& scenario() const noexcept { return scenario_; }
  const Eigen::MatrixXd& spatial_factor() const noexcept { return ls_; }
  const Eigen::MatrixXd& temporal_factor() const noexcept { return lt_; }

  /// One realisation, shape (points x n_time).
  Eigen::MatrixXd draw(std::uint64_t seed) const {
    Rng rng = make_rng(seed);
    std::normal_distribution<double> normal;
    const auto np = static_cast<Eigen::Index>(scenario_.point_count());
    const auto n = static_cast<Eigen::Index>(scenario_.n_time);
    Eigen::MatrixXd e(np, n);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < np; ++i) e(i, j) = normal(rng);
    Eigen::MatrixXd x = ls_.triangularView<Eigen::Lower>() * e;
    x = x * lt_.transpose().triangularView<Eigen::Upper>();
    if (scenario_.transform) x = x.unaryExpr(scenario_.transform);
    return x;
  }

private:
  SimScenario scenario_;
  Eigen::MatrixXd ls_;
  Eigen::MatrixXd lt_;
};

inline Eigen::MatrixXd simulate(const SimScenario& sc) { return FieldSimulator(sc).draw(sc.seed); }

/// P(X >= x0) for the stationary marginal N(0, sigma_T2 sigma_S2), mapped
/// through the inverse transform when one is set.
inline double true_exceedance(const SimScenario& sc, double x0) {
  validate(sc.cov);
  if (sc.transform && !sc.inverse_transform) {
    throw ValidationError("true_exceedance: transform has no inverse");
  }
  const double z0 = sc.transform ? sc.inverse_transform(x0) : x0;
  const double sd = std::sqrt(sc.cov.sigma_T2 * sc.cov.sigma_S2);
  if (std::isinf(z0)) return z0 > 0 ? 0.0 : 1.0;
  return 1.0 - normal_cdf(z0 / sd);
}

/// m distinct cell indices, uniform without replacement.
inline std::vector<std::size_t> sample_cells(const GridSpec& grid, std::size_t m, std::uint64_t seed) {
  const std::size_t n = grid.cell_count();
  require(m <= n, "sample_sites: requested " + std::to_string(m) + " sites from " + std::to_string(n) +
                      " cells");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = make_rng(seed);
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(m);
  return idx;
}

inline std::vector<Location> sample_sites(const GridSpec& grid, std::size_t m, std::uint64_t seed) {
  std::vector<Location> out;
  for (std::size_t i : sample_cells(grid, m, seed)) out.push_back(grid.cell(i));
  return out;
}

/// Station view of a simulated field: grid cell k becomes station "c<k>",
/// extra site k becomes "x<k>", on daily dates starting at `start`.
inline StationSet to_station_set(const SimScenario& sc, const Eigen::MatrixXd& field, Date start) {
  require(static_cast<std::size_t>(field.rows()) == sc.point_count() &&
              static_cast<std::size_t>(field.cols()) == sc.n_time,
          "to_station_set: field shape does not match scenario");
  StationSet set;
  set.grid = TimeGrid::daily(start, sc.n_time);
  const auto pts = scenario_points(sc);
  const std::size_t ncell = sc.grid.cell_count();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const std::string id = i < ncell ? "c" + std::to_string(i) : "x" + std::to_string(i - ncell);
    std::vector<double> v(sc.n_time);
    for (std::size_t t = 0; t < sc.n_time; ++t) v[t] = field(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t));
    set.stations.push_back(make_series(id, pts[i], std::move(v)));
  }
  return set;
}

}  // namespace exceed
