#pragma once

// Per-station temporal estimators of exceedance probabilities:
//   IND  raw indicators,
//   EDF  EDF-weighted moving average of indicators,
//   KER  Nadaraya-Watson kernel smoothing of indicators on rescaled time,
// plus the global bandwidth rule and pointwise confidence bands for KER.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "exceed/data_model.hpp"
#include "exceed/error.hpp"
#include "exceed/special_functions.hpp"

namespace exceed {

enum class KernelFamily { gaussian, epanechnikov };

inline KernelFamily parse_kernel(std::string_view s) {
  if (s == "gaussian") return KernelFamily::gaussian;
  if (s == "epanechnikov") return KernelFamily::epanechnikov;
  throw ValidationError("unknown kernel '" + std::string(s) + "'");
}

struct KernelSpec {
  KernelFamily family = KernelFamily::gaussian;
  double bandwidth = 0.1;  // on rescaled time (0, 1]

  /// Kernel density K(u); integrates to one.
  double operator()(double u) const noexcept {
    switch (family) {
      case KernelFamily::gaussian: return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
      case KernelFamily::epanechnikov: return std::abs(u) < 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
    }
    return 0.0;
  }

  /// R(K) = integral of K^2.
  double roughness() const noexcept {
    return family == KernelFamily::gaussian ? 1.0 / (2.0 * std::sqrt(std::numbers::pi)) : 0.6;
  }
};

inline void validate(const KernelSpec& k) {
  require(std::isfinite(k.bandwidth) && k.bandwidth > 0.0,
          "kernel bandwidth must be positive, got " + std::to_string(k.bandwidth));
}

/// Global bandwidth b = c n^(-1/5), clipped to (0, 0.5].
inline double bandwidth_rule(std::size_t n, double c = 1.0) {
  require(n >= 2, "bandwidth_rule: n must be at least 2");
  require(std::isfinite(c) && c > 0.0, "bandwidth_rule: scale constant must be positive");
  return std::min(0.5, c * std::pow(static_cast<double>(n), -0.2));
}

inline std::vector<double> smooth_ind(std::span<const std::uint8_t> indicators) {
  require(!indicators.empty(), "smooth_ind: empty indicator series");
  return {indicators.begin(), indicators.end()};
}

/// Normalised Nadaraya-Watson weights at rescaled time t over t_i = i/n.
inline std::vector<double> kernel_weights(std::size_t n, const KernelSpec& k, double t) {
  validate(k);
  std::vector<double> w(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double ti = static_cast<double>(i + 1) / static_cast<double>(n);
    w[i] = k((ti - t) / k.bandwidth);
    total += w[i];
  }
  if (!(total > 0.0)) {
    throw NumericalError("kernel smoother: all weights are zero at t = " + std::to_string(t) +
                         " (bandwidth " + std::to_string(k.bandwidth) + " too small for a compact kernel)");
  }
  for (double& v : w) v /= total;
  return w;
}

/// Nadaraya-Watson estimate at rescaled time t.
inline double smooth_ker(std::span<const std::uint8_t> indicators, const KernelSpec& k, double t) {
  validate(k);
  const std::size_t n = indicators.size();
  require(n >= 1, "smooth_ker: empty indicator series");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double ti = static_cast<double>(i + 1) / static_cast<double>(n);
    const double w = k((ti - t) / k.bandwidth);
    den += w;
    if (indicators[i]) num += w;
  }
  if (!(den > 0.0)) {
    throw NumericalError("smooth_ker: all kernel weights are zero at t = " + std::to_string(t) +
                         " (bandwidth " + std::to_string(k.bandwidth) + " too small for a compact kernel)");
  }
  return std::clamp(num / den, 0.0, 1.0);
}

inline double smooth_ker(std::span<const std::uint8_t> indicators, const TimeGrid& grid,
                         const KernelSpec& k, double t) {
  require(grid.size() == indicators.size(), "smooth_ker: indicator length does not match time grid");
  return smooth_ker(indicators, k, t);
}

/// KER at every grid point t_i, with the weight matrix built once and reused
/// across stations and thresholds.
class KerSmoother {
public:
  KerSmoother(std::size_t n, const KernelSpec& k) : n_(n), kernel_(k), w_(n * n), den_(n, 0.0) {
    validate(k);
    require(n >= 1, "KerSmoother: empty time grid");
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i + 1) / static_cast<double>(n);
      for (std::size_t j = 0; j < n; ++j) {
        const double tj = static_cast<double>(j + 1) / static_cast<double>(n);
        w_[i * n + j] = k((tj - t) / k.bandwidth);
        den_[i] += w_[i * n + j];
      }
      if (!(den_[i] > 0.0)) {
        throw NumericalError("KerSmoother: all kernel weights are zero at t = " + std::to_string(t));
      }
    }
  }

  std::size_t size() const noexcept { return n_; }
  const KernelSpec& kernel() const noexcept { return kernel_; }

  std::vector<double> operator()(std::span<const std::uint8_t> indicators) const {
    require(indicators.size() == n_, "KerSmoother: indicator length does not match time grid");
    std::vector<double> out(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      const double* row = w_.data() + i * n_;
      double acc = 0.0;
      for (std::size_t j = 0; j < n_; ++j)
        if (indicators[j]) acc += row[j];
      out[i] = std::clamp(acc / den_[i], 0.0, 1.0);
    }
    return out;
  }

private:
  std::size_t n_;
  KernelSpec kernel_;
  std::vector<double> w_;    // unnormalised K((t_j - t_i)/b), row-major
  std::vector<double> den_;  // row sums
};

/// KER estimate at every grid point t_i.
inline std::vector<double> smooth_ker_series(std::span<const std::uint8_t> indicators, const KernelSpec& k) {
  return KerSmoother(indicators.size(), k)(indicators);
}

/// EDF method. For each t_i, the indicators in a centred window of `window`
/// points (truncated at the ends) are averaged with weights EDF(values[j]),
/// where the EDF is computed from the whole series. A window whose weights
/// all vanish falls back to the plain mean of its indicators.
inline std::vector<double> smooth_edf(std::span<const double> values, double x0, std::size_t window) {
  const std::size_t n = values.size();
  require(n >= 1, "smooth_edf: empty series");
  require(window >= 1 && window % 2 == 1, "smooth_edf: window must be a positive odd integer");
  require(window <= n, "smooth_edf: window exceeds series length");

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> edf(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto rank = std::upper_bound(sorted.begin(), sorted.end(), values[j]) - sorted.begin();
    edf[j] = static_cast<double>(rank) / static_cast<double>(n);
  }

  const std::size_t half = window / 2;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n, i + half + 1);
    double num = 0.0, den = 0.0, hits = 0.0;
    for (std::size_t j = lo; j < hi; ++j) {
      const bool hit = values[j] >= x0;
      den += edf[j];
      if (hit) {
        num += edf[j];
        hits += 1.0;
      }
    }
    out[i] = den > 0.0 ? num / den : hits / static_cast<double>(hi - lo);
    out[i] = std::clamp(out[i], 0.0, 1.0);
  }
  return out;
}

/// Smoothed lag covariances g(0..L) of an indicator process.
struct CovEstimate {
  std::vector<double> g;

  std::size_t max_lag() const noexcept { return g.empty() ? 0 : g.size() - 1; }
};

/// Local lag covariances at one time point: residual cross-products weighted
/// by the kernel weights w, for lags 0..L. |g(k)| is capped at g(0).
inline CovEstimate local_lag_covariances(std::span<const double> residuals, std::span<const double> w,
                                         std::size_t max_lag) {
  const std::size_t n = residuals.size();
  CovEstimate c;
  c.g.assign(max_lag + 1, 0.0);
  for (std::size_t k = 0; k <= max_lag && k < n; ++k) {
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j + k < n; ++j) {
      const double wj = 0.5 * (w[j] + w[j + k]);
      num += wj * residuals[j] * residuals[j + k];
      den += wj;
    }
    c.g[k] = den > 0.0 ? num / den : 0.0;
  }
  c.g[0] = std::max(c.g[0], 0.0);
  for (std::size_t k = 1; k < c.g.size(); ++k) c.g[k] = std::clamp(c.g[k], -c.g[0], c.g[0]);
  return c;
}

struct ConfidenceBand {
  std::vector<double> estimate;
  std::vector<double> sd;
  std::vector<double> lower;
  std::vector<double> upper;
  std::size_t floored = 0;  // time points whose variance estimate came out negative
};

/// Pointwise bands for the KER estimate:
///   Var(t) = sum_i sum_j w_i(t) w_j(t) g_t(|i-j|),   |i-j| <= L = floor(n^(1/3)),
/// with g_t the kernel-localised empirical lag covariances of the residual
/// indicator process. Band = estimate -/+ z sd, clipped to [0, 1].
inline ConfidenceBand variance_band(std::span<const std::uint8_t> indicators, const KernelSpec& k,
                                    double level) {
  validate(k);
  require(level > 0.0 && level < 1.0, "variance_band: level must lie in (0, 1)");
  const std::size_t n = indicators.size();
  const auto max_lag = static_cast<std::size_t>(std::floor(std::cbrt(static_cast<double>(n)) + 1e-12));
  require(max_lag >= 1 && n >= 2, "variance_band: series too short for a lag window");
  const double z = normal_quantile(0.5 + 0.5 * level);

  ConfidenceBand band;
  band.estimate = smooth_ker_series(indicators, k);
  std::vector<double> resid(n);
  for (std::size_t i = 0; i < n; ++i) resid[i] = static_cast<double>(indicators[i]) - band.estimate[i];

  band.sd.resize(n);
  band.lower.resize(n);
  band.upper.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto w = kernel_weights(n, k, static_cast<double>(i + 1) / static_cast<double>(n));
    const CovEstimate cov = local_lag_covariances(resid, w, max_lag);
    double var = 0.0;
    for (std::size_t lag = 0; lag <= max_lag; ++lag) {
      double cross = 0.0;
      for (std::size_t j = 0; j + lag < n; ++j) cross += w[j] * w[j + lag];
      var += (lag == 0 ? 1.0 : 2.0) * cov.g[lag] * cross;
    }
    if (var < 0.0) {
      ++band.floored;
      var = 0.0;
    }
    band.sd[i] = std::sqrt(var);
    band.lower[i] = std::clamp(band.estimate[i] - z * band.sd[i], 0.0, 1.0);
    band.upper[i] = std::clamp(band.estimate[i] + z * band.sd[i], 0.0, 1.0);
  }
  return band;
}

struct SmootherConfig {
  Method method = Method::KER;
  double bandwidth_c = 1.0;
  KernelFamily kernel = KernelFamily::gaussian;
  std::size_t window = 7;
};

inline KernelSpec kernel_for(std::size_t n, const SmootherConfig& cfg) {
  return {cfg.kernel, bandwidth_rule(n, cfg.bandwidth_c)};
}

/// Runs the configured estimator over a fully observed series.
inline std::vector<double> smooth(std::span<const double> values, double x0, const SmootherConfig& cfg) {
  switch (cfg.method) {
    case Method::IND: {
      const auto ind = indicator_series(values, x0);
      return smooth_ind(ind);
    }
    case Method::EDF: return smooth_edf(values, x0, cfg.window);
    case Method::KER: {
      const auto ind = indicator_series(values, x0);
      return smooth_ker_series(ind, kernel_for(values.size(), cfg));
    }
  }
  return {};
}

}  // namespace exceed
