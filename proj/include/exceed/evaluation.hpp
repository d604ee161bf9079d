#pragma once

// Experiments: the simulated RMSE comparison of IND / EDF / KER at an
// off-grid target, leave-one-out cross-validation, seasonal averaging of
// daily maps, and Monte-Carlo checks of the KER convergence rate and
// asymptotic normality.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "exceed/data_model.hpp"
#include "exceed/error.hpp"
#include "exceed/kriging.hpp"
#include "exceed/parallel.hpp"
#include "exceed/rng.hpp"
#include "exceed/simulator.hpp"
#include "exceed/smoothers.hpp"

namespace exceed {

/// Pairwise (cascade) summation; the result depends only on the input order.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

struct MeanSd {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double sd = std::numeric_limits<double>::quiet_NaN();
};

/// Mean and sample standard deviation (n - 1 denominator; 0 for one value).
inline MeanSd mean_sd(std::span<const double> v) {
  MeanSd r;
  if (v.empty()) return r;
  const double n = static_cast<double>(v.size());
  r.mean = pairwise_sum(v) / n;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - r.mean) * (v[i] - r.mean);
  r.sd = v.size() > 1 ? std::sqrt(pairwise_sum(sq) / (n - 1.0)) : 0.0;
  return r;
}

inline double rmse_time(std::span<const double> estimates, std::span<const double> truth) {
  require(estimates.size() == truth.size(),
          "rmse_time: length mismatch (" + std::to_string(estimates.size()) + " vs " +
              std::to_string(truth.size()) + ")");
  require(!estimates.empty(), "rmse_time: empty sequences");
  std::vector<double> sq(estimates.size());
  for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = (estimates[i] - truth[i]) * (estimates[i] - truth[i]);
  return std::sqrt(pairwise_sum(sq) / static_cast<double>(sq.size()));
}

// ---------------------------------------------------------------------------
// Kriging a space-time table of estimates to one target location.

enum class FitMode {
  per_day,        // refit Matern parameters by ML on every day's field
  time_averaged,  // fit once on the time-averaged field, reuse for all days
};

inline FitMode parse_fit_mode(std::string_view s) {
  if (s == "per-day" || s == "per_day") return FitMode::per_day;
  if (s == "time-averaged" || s == "time_averaged") return FitMode::time_averaged;
  throw ValidationError("unknown fit mode '" + std::string(s) + "'");
}

struct KrigingConfig {
  FitMode fit = FitMode::per_day;
  FitOptions fit_options{};
};

namespace detail {

inline bool all_equal(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

// Used when the time-averaged field is constant and carries no information
// about spatial dependence: exponential correlation with range of a third of
// the site extent.
inline KrigingModel fallback_model(std::span<const Location> sites, MeanModel mean) {
  const DistanceTable table(sites);
  KrigingModel m;
  m.params = {1.0, std::max(table.max_distance() / 3.0, 1e-6), 0.5};
  m.mean = mean;
  m.sites.assign(sites.begin(), sites.end());
  return m;
}

}  // namespace detail

/// Kriged (unclamped) predictions at `target` for every column (day) of
/// `estimates` (sites x days). Days on which all sites agree are reproduced
/// exactly without fitting.
inline std::vector<double> krige_to_target(std::span<const Location> sites, const Eigen::MatrixXd& estimates,
                                           const Location& target, const KrigingConfig& cfg) {
  const auto m = static_cast<std::size_t>(estimates.rows());
  const auto n = static_cast<std::size_t>(estimates.cols());
  require(m == sites.size(), "krige_to_target: estimates are not aligned with sites");
  std::vector<double> out(n);
  std::vector<double> day(m);

  if (cfg.fit == FitMode::time_averaged) {
    const Eigen::VectorXd avg = estimates.rowwise().mean();
    const std::vector<double> avg_v(avg.data(), avg.data() + m);
    const KrigingModel model = detail::all_equal(avg_v) ? detail::fallback_model(sites, cfg.fit_options.mean)
                                                        : fit_ml(sites, avg_v, cfg.fit_options);
    const KrigingPredictor predictor(model);
    const Eigen::VectorXd lambda = predictor.weights(target).lambda;
    for (std::size_t t = 0; t < n; ++t) out[t] = lambda.dot(estimates.col(static_cast<Eigen::Index>(t)));
    return out;
  }

  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t i = 0; i < m; ++i) day[i] = estimates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t));
    if (detail::all_equal(day)) {
      out[t] = day.front();
      continue;
    }
    const KrigingModel model = fit_ml(sites, day, cfg.fit_options);
    out[t] = KrigingPredictor(model).predict(day, target).pred;
  }
  return out;
}

/// Temporal estimates for a set of series, one row per series.
inline Eigen::MatrixXd smooth_rows(const Eigen::MatrixXd& values, double x0, const SmootherConfig& cfg,
                                   const KerSmoother* ker = nullptr) {
  const auto m = values.rows();
  const auto n = values.cols();
  Eigen::MatrixXd out(m, n);
  std::vector<double> row(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index t = 0; t < n; ++t) row[static_cast<std::size_t>(t)] = values(i, t);
    std::vector<double> est;
    if (cfg.method == Method::KER && ker) {
      est = (*ker)(indicator_series(row, x0));
    } else {
      est = smooth(row, x0, cfg);
    }
    for (Eigen::Index t = 0; t < n; ++t) out(i, t) = est[static_cast<std::size_t>(t)];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Simulated RMSE comparison.

struct ExperimentConfig {
  std::size_t reps = 50;
  std::vector<Method> methods{Method::IND, Method::EDF, Method::KER};
  std::vector<double> thresholds{0.0, 2.0};
  std::vector<std::size_t> m_values{24, 400};
  SimScenario scenario{};  // extra_sites and seed are managed by the harness
  double bandwidth_c = 1.0;
  KernelFamily kernel = KernelFamily::gaussian;
  std::size_t window = 7;
  std::uint64_t seed = 0;
  std::size_t parallel = 1;
  // Predictor sets up to this size refit the covariance every day; larger sets
  // fit once per replicate on the time-averaged field.
  std::size_t per_day_refit_max_m = 100;
  MeanModel mean = MeanModel::constant;
};

struct ExperimentCell {
  Method method = Method::KER;
  double threshold = 0.0;
  std::size_t m = 0;
  MeanSd rmse;      // predictions clamped to [0, 1] (headline)
  MeanSd raw_rmse;  // unclamped predictions
  std::size_t replicates = 0;
};

struct ReplicateFailure {
  std::size_t replicate = 0;
  std::string reason;
};

struct ExperimentReport {
  ExperimentConfig config;
  Location target;
  std::vector<ExperimentCell> cells;  // ordered by method, threshold, m
  std::size_t succeeded = 0;
  std::vector<ReplicateFailure> failures;
  double wall_clock_seconds = 0.0;

  const ExperimentCell& cell(Method method, double threshold, std::size_t m) const {
    for (const auto& c : cells)
      if (c.method == method && c.threshold == threshold && c.m == m) return c;
    throw ValidationError("experiment report has no such cell");
  }
};

/// Off-grid target: the centre of a grid square drawn from the master seed.
inline Location experiment_target(const GridSpec& grid, std::uint64_t seed) {
  require(grid.nx >= 2 && grid.ny >= 2, "experiment grid must be at least 2x2");
  Rng rng = make_rng(derive_seed(seed, 0x7a5c3e));
  std::uniform_int_distribution<std::size_t> px(0, grid.nx - 2), py(0, grid.ny - 2);
  const std::size_t ix = px(rng), iy = py(rng);
  return {grid.origin.x + grid.spacing * (static_cast<double>(ix) + 0.5),
          grid.origin.y + grid.spacing * (static_cast<double>(iy) + 0.5)};
}

inline ExperimentReport run_table1(const ExperimentConfig& cfg) {
  const auto started = std::chrono::steady_clock::now();
  require(cfg.reps >= 1, "experiment: replicate count must be positive");
  require(!cfg.methods.empty() && !cfg.thresholds.empty() && !cfg.m_values.empty(),
          "experiment: methods, thresholds and m values must be non-empty");
  const GridSpec& grid = cfg.scenario.grid;
  validate(grid);
  for (std::size_t m : cfg.m_values) {
    require(m >= 4 && m <= grid.cell_count(), "experiment: m must lie in [4, cell count], got " + std::to_string(m));
  }

  ExperimentReport report;
  report.config = cfg;
  report.target = experiment_target(grid, cfg.seed);

  SimScenario sc = cfg.scenario;
  sc.extra_sites = {report.target};
  const FieldSimulator sim(sc);
  const std::size_t n = sc.n_time;
  const KerSmoother ker(n, {cfg.kernel, bandwidth_rule(n, cfg.bandwidth_c)});

  const std::size_t ncells = cfg.methods.size() * cfg.thresholds.size() * cfg.m_values.size();
  auto cell_index = [&](std::size_t mi, std::size_t ti, std::size_t ki) {
    return (mi * cfg.thresholds.size() + ti) * cfg.m_values.size() + ki;
  };

  struct RepResult {
    bool ok = false;
    std::string reason;
    std::vector<double> rmse, raw_rmse;
  };
  std::vector<RepResult> results(cfg.reps);

  parallel_for(cfg.reps, cfg.parallel, [&](std::size_t r) {
    RepResult& out = results[r];
    try {
      const std::uint64_t rep_seed = derive_seed(cfg.seed, r + 1);
      const Eigen::MatrixXd field = sim.draw(derive_seed(rep_seed, 1));
      out.rmse.assign(ncells, 0.0);
      out.raw_rmse.assign(ncells, 0.0);
      for (std::size_t ki = 0; ki < cfg.m_values.size(); ++ki) {
        const std::size_t m = cfg.m_values[ki];
        std::vector<std::size_t> idx;
        if (m == grid.cell_count()) {
          idx.resize(m);
          std::iota(idx.begin(), idx.end(), 0);
        } else {
          idx = sample_cells(grid, m, derive_seed(rep_seed, 2 + ki));
        }
        std::vector<Location> sites;
        Eigen::MatrixXd values(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < m; ++i) {
          sites.push_back(grid.cell(idx[i]));
          values.row(static_cast<Eigen::Index>(i)) = field.row(static_cast<Eigen::Index>(idx[i]));
        }
        KrigingConfig kcfg;
        kcfg.fit = m <= cfg.per_day_refit_max_m ? FitMode::per_day : FitMode::time_averaged;
        kcfg.fit_options.mean = cfg.mean;

        for (std::size_t ti = 0; ti < cfg.thresholds.size(); ++ti) {
          const double x0 = cfg.thresholds[ti];
          const std::vector<double> truth(n, true_exceedance(sc, x0));
          for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
            SmootherConfig scfg{cfg.methods[mi], cfg.bandwidth_c, cfg.kernel, cfg.window};
            const Eigen::MatrixXd est = smooth_rows(values, x0, scfg, &ker);
            std::vector<double> raw = krige_to_target(sites, est, report.target, kcfg);
            const std::size_t c = cell_index(mi, ti, ki);
            out.raw_rmse[c] = rmse_time(raw, truth);
            for (double& v : raw) v = std::clamp(v, 0.0, 1.0);
            out.rmse[c] = rmse_time(raw, truth);
          }
        }
      }
      out.ok = true;
    } catch (const std::exception& e) {
      out.ok = false;
      out.reason = e.what();
    }
  });

  for (std::size_t r = 0; r < cfg.reps; ++r) {
    if (results[r].ok) {
      ++report.succeeded;
    } else {
      report.failures.push_back({r, results[r].reason});
    }
  }
  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi)
    for (std::size_t ti = 0; ti < cfg.thresholds.size(); ++ti)
      for (std::size_t ki = 0; ki < cfg.m_values.size(); ++ki) {
        const std::size_t c = cell_index(mi, ti, ki);
        std::vector<double> v, raw;
        for (const auto& rr : results)
          if (rr.ok) {
            v.push_back(rr.rmse[c]);
            raw.push_back(rr.raw_rmse[c]);
          }
        report.cells.push_back(
            {cfg.methods[mi], cfg.thresholds[ti], cfg.m_values[ki], mean_sd(v), mean_sd(raw), v.size()});
      }
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

inline void write_report_csv(std::ostream& os, const ExperimentReport& rep) {
  os << "method,threshold,m,mean_rmse,sd_rmse,R,seed\n";
  for (const auto& c : rep.cells) {
    os << to_string(c.method) << ',' << detail::fmt(c.threshold) << ',' << c.m << ',' << detail::fmt(c.rmse.mean)
       << ',' << detail::fmt(c.rmse.sd) << ',' << rep.config.reps << ',' << rep.config.seed << '\n';
  }
}

/// Human-readable layout: one row per method, one "mean (sd)" column per
/// (threshold, m), preceded by a config block.
inline void write_report_table(std::ostream& os, const ExperimentReport& rep) {
  const auto& cfg = rep.config;
  const auto& sc = cfg.scenario;
  os << "# scenario: " << sc.grid.nx << "x" << sc.grid.ny << " grid, spacing " << sc.grid.spacing << ", "
     << sc.n_time << " time points\n"
     << "# covariance: sigma_T2=" << sc.cov.sigma_T2 << " alpha=" << sc.cov.alpha << " sigma_S2=" << sc.cov.sigma_S2
     << " gamma=" << sc.cov.gamma << "\n"
     << "# KER bandwidth c=" << cfg.bandwidth_c << " (b=" << bandwidth_rule(sc.n_time, cfg.bandwidth_c)
     << "), EDF window=" << cfg.window << ", mean model " << to_string(cfg.mean) << "\n"
     << "# target X=(" << rep.target.x << ", " << rep.target.y << "), replicates " << rep.succeeded << "/"
     << cfg.reps << ", seed " << cfg.seed << "\n";
  for (const auto& f : rep.failures) os << "# replicate " << f.replicate << " failed: " << f.reason << "\n";

  std::ostringstream head;
  head << std::left << std::setw(8) << "method";
  for (double x0 : cfg.thresholds)
    for (std::size_t m : cfg.m_values) {
      std::ostringstream col;
      col << "x0=" << x0 << " m=" << m;
      head << std::setw(22) << col.str();
    }
  os << head.str() << "\n";
  for (Method method : cfg.methods) {
    os << std::left << std::setw(8) << to_string(method);
    for (double x0 : cfg.thresholds)
      for (std::size_t m : cfg.m_values) {
        const auto& c = rep.cell(method, x0, m);
        std::ostringstream cell;
        cell << std::fixed << std::setprecision(4) << c.rmse.mean << " (" << c.rmse.sd << ")";
        os << std::setw(22) << cell.str();
      }
    os << "\n";
  }
  os << "# unclamped RMSE means:";
  for (const auto& c : rep.cells) {
    std::ostringstream v;
    v << std::fixed << std::setprecision(4) << c.raw_rmse.mean;
    os << " " << to_string(c.method) << "/" << c.threshold << "/" << c.m << "=" << v.str();
  }
  os << "\n";
}

// ---------------------------------------------------------------------------
// Leave-one-out cross-validation.

struct StationRmse {
  std::string station_id;
  double rmse = 0.0;
};

/// For every station: hold it out, krige the remaining stations' daily
/// estimates to its location and compare with its own "observed" series (raw
/// indicators for IND, its own smoothed series for EDF and KER). Predictions
/// are clamped to [0, 1].
inline std::vector<StationRmse> loo_crossval(const StationSet& set, double x0, const SmootherConfig& smoother,
                                             const KrigingConfig& kriging, std::size_t parallel = 1) {
  const std::size_t ns = set.stations.size();
  require(ns >= 4, "loo_crossval: at least 4 stations are required");
  const std::size_t n = set.grid.size();
  Eigen::MatrixXd est(static_cast<Eigen::Index>(ns), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < ns; ++i) {
    const auto& s = set.stations[i];
    require(s.fully_observed(), "loo_crossval: station " + s.id + " has missing values; impute first");
    require(s.size() == n, "loo_crossval: station " + s.id + " length mismatch");
    const auto e = smooth(s.values, x0, smoother);
    for (std::size_t t = 0; t < n; ++t) est(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = e[t];
  }

  std::vector<StationRmse> out(ns);
  parallel_for(ns, parallel, [&](std::size_t hold) {
    std::vector<Location> sites;
    Eigen::MatrixXd rest(static_cast<Eigen::Index>(ns - 1), static_cast<Eigen::Index>(n));
    Eigen::Index r = 0;
    for (std::size_t i = 0; i < ns; ++i) {
      if (i == hold) continue;
      sites.push_back(set.stations[i].loc);
      rest.row(r++) = est.row(static_cast<Eigen::Index>(i));
    }
    auto pred = krige_to_target(sites, rest, set.stations[hold].loc, kriging);
    for (double& v : pred) v = std::clamp(v, 0.0, 1.0);
    std::vector<double> observed(n);
    for (std::size_t t = 0; t < n; ++t) observed[t] = est(static_cast<Eigen::Index>(hold), static_cast<Eigen::Index>(t));
    out[hold] = {set.stations[hold].id, rmse_time(pred, observed)};
  });
  return out;
}

inline double median(std::vector<double> v) {
  require(!v.empty(), "median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

// ---------------------------------------------------------------------------
// Seasonal aggregation.

struct Season {
  std::string name;
  std::function<bool(Date)> contains;
};

namespace detail {

inline unsigned month_day(Date d) {
  const std::chrono::year_month_day ymd{d};
  return static_cast<unsigned>(ymd.month()) * 100 + static_cast<unsigned>(ymd.day());
}

}  // namespace detail

/// April 1 to September 30, inclusive, in any year.
inline Season summer() {
  return {"summer", [](Date d) {
            const unsigned md = detail::month_day(d);
            return md >= 401 && md <= 930;
          }};
}

inline Season winter() {
  return {"winter", [](Date d) { return !summer().contains(d); }};
}

inline Season date_range(Date first, Date last) {
  require(first <= last, "season range is empty");
  return {format_iso_date(first) + ".." + format_iso_date(last),
          [first, last](Date d) { return d >= first && d <= last; }};
}

/// "summer", "winter", or "YYYY-MM-DD..YYYY-MM-DD".
inline Season parse_season(std::string_view s) {
  if (s == "summer") return summer();
  if (s == "winter") return winter();
  const auto dots = s.find("..");
  if (dots == std::string_view::npos) {
    throw ValidationError("unknown season '" + std::string(s) + "' (summer, winter or FROM..TO)");
  }
  return date_range(parse_iso_date(s.substr(0, dots)), parse_iso_date(s.substr(dots + 2)));
}

/// Cellwise mean of the daily fields whose date is in the season. The
/// standard error is sqrt(mean of daily variances), which ignores the
/// correlation between days.
inline KrigedField seasonal_average(std::span<const KrigedField> fields, std::span<const Date> days,
                                    const Season& season) {
  require(fields.size() == days.size(), "seasonal_average: one date per field required");
  std::vector<std::size_t> sel;
  for (std::size_t i = 0; i < days.size(); ++i)
    if (season.contains(days[i])) sel.push_back(i);
  if (sel.empty()) throw ValidationError("seasonal_average: no day falls in season " + season.name);

  const KrigedField& first = fields[sel.front()];
  const std::size_t cells = first.grid.cell_count();
  KrigedField out;
  out.grid = first.grid;
  out.method = first.method;
  out.transform = first.transform;
  out.label = season.name;
  out.raw.resize(cells);
  out.pred.resize(cells);
  out.se.resize(cells);
  std::vector<double> a(sel.size()), b(sel.size()), c(sel.size());
  for (std::size_t k = 0; k < cells; ++k) {
    for (std::size_t j = 0; j < sel.size(); ++j) {
      const auto& f = fields[sel[j]];
      require(f.grid.cell_count() == cells, "seasonal_average: fields on different grids");
      a[j] = f.raw[k];
      b[j] = f.pred[k];
      c[j] = f.se[k] * f.se[k];
    }
    const double count = static_cast<double>(sel.size());
    out.raw[k] = pairwise_sum(a) / count;
    out.pred[k] = pairwise_sum(b) / count;
    out.se[k] = std::sqrt(pairwise_sum(c) / count);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Monte-Carlo properties of the KER estimator.

struct MonteCarloSeries {
  double phi = 0.5;  // AR(1) coefficient of the latent unit-variance Gaussian series
  double x0 = 0.0;   // threshold; true probability is 1 - Phi(x0)
  double t = 0.5;    // evaluation point on rescaled time
};

/// Stationary AR(1) series with unit marginal variance.
inline std::vector<double> ar1_series(std::size_t n, double phi, Rng& rng) {
  std::normal_distribution<double> normal;
  std::vector<double> z(n);
  const double innov = std::sqrt(1.0 - phi * phi);
  z[0] = normal(rng);
  for (std::size_t i = 1; i < n; ++i) z[i] = phi * z[i - 1] + innov * normal(rng);
  return z;
}

struct RateCheckResult {
  std::vector<std::size_t> ns;
  std::vector<double> rmse;
  double slope = 0.0;
  bool wide_tolerance = false;  // too few replicates for the slope to be meaningful
};

/// Monte-Carlo RMSE of the KER estimate at a fixed interior time for each n
/// with b = c n^(-1/5), and the least-squares slope of log RMSE on log n.
inline RateCheckResult rate_check(std::span<const std::size_t> ns, double bandwidth_c, std::size_t reps,
                                  std::uint64_t seed, const MonteCarloSeries& mc = {}) {
  require(reps >= 1, "rate_check: reps must be positive");
  std::vector<std::size_t> distinct(ns.begin(), ns.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  require(distinct.size() >= 3, "rate_check: at least 3 distinct n values are required");

  RateCheckResult res;
  res.wide_tolerance = reps < 30;
  const double truth = 1.0 - normal_cdf(mc.x0);
  for (std::size_t n : ns) {
    const KernelSpec k{KernelFamily::gaussian, bandwidth_rule(n, bandwidth_c)};
    std::vector<double> sq(reps);
    for (std::size_t r = 0; r < reps; ++r) {
      Rng rng = make_rng(derive_seed(derive_seed(seed, n), r));
      const auto z = ar1_series(n, mc.phi, rng);
      const double est = smooth_ker(indicator_series(z, mc.x0), k, mc.t);
      sq[r] = (est - truth) * (est - truth);
    }
    res.ns.push_back(n);
    res.rmse.push_back(std::sqrt(pairwise_sum(sq) / static_cast<double>(reps)));
  }

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double cnt = static_cast<double>(res.ns.size());
  for (std::size_t i = 0; i < res.ns.size(); ++i) {
    if (!(res.rmse[i] > 0.0)) throw NumericalError("rate_check: zero RMSE makes the log-log fit degenerate");
    const double x = std::log(static_cast<double>(res.ns[i])), y = std::log(res.rmse[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = cnt * sxx - sx * sx;
  if (!(std::abs(denom) > 0.0)) throw NumericalError("rate_check: degenerate regression");
  res.slope = (cnt * sxy - sx * sy) / denom;
  return res;
}

struct NormalityCheckResult {
  double mean = 0.0;
  double sd = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
};

/// Sample moments of standardised KER estimates at a fixed time across
/// independent replicate series.
inline NormalityCheckResult normality_check(std::size_t n, double bandwidth_c, std::size_t reps,
                                            std::uint64_t seed, const MonteCarloSeries& mc = {}) {
  require(reps >= 3, "normality_check: at least 3 replicates are required");
  const KernelSpec k{KernelFamily::gaussian, bandwidth_rule(n, bandwidth_c)};
  std::vector<double> est(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    Rng rng = make_rng(derive_seed(seed, r));
    est[r] = smooth_ker(indicator_series(ar1_series(n, mc.phi, rng), mc.x0), k, mc.t);
  }
  NormalityCheckResult res;
  const auto ms = mean_sd(est);
  res.mean = ms.mean;
  res.sd = ms.sd;
  if (!(ms.sd > 0.0)) throw NumericalError("normality_check: estimates have zero spread");
  std::vector<double> m3(reps), m4(reps), m2(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    const double d = est[r] - ms.mean;
    m2[r] = d * d;
    m3[r] = d * d * d;
    m4[r] = d * d * d * d;
  }
  const double cnt = static_cast<double>(reps);
  const double v = pairwise_sum(m2) / cnt;
  res.skewness = pairwise_sum(m3) / cnt / std::pow(v, 1.5);
  res.excess_kurtosis = pairwise_sum(m4) / cnt / (v * v) - 3.0;
  return res;
}

}  // namespace exceed
