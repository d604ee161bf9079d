#pragma once

// Maximum-likelihood Matern fitting and universal kriging (BLUP) with
// standard errors. Kriging variances ignore the uncertainty of the fitted
// covariance parameters.

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "exceed/covariance.hpp"
#include "exceed/data_model.hpp"
#include "exceed/error.hpp"
#include "exceed/optimize.hpp"

namespace exceed {

enum class MeanModel { constant, linear };

inline std::string to_string(MeanModel m) { return m == MeanModel::constant ? "constant" : "linear"; }

inline MeanModel parse_mean_model(std::string_view s) {
  if (s == "constant") return MeanModel::constant;
  if (s == "linear") return MeanModel::linear;
  throw ValidationError("unknown mean model '" + std::string(s) + "'");
}

struct KrigingModel {
  MaternParams params;
  MeanModel mean = MeanModel::constant;
  double log_likelihood = std::numeric_limits<double>::quiet_NaN();
  std::vector<Location> sites;
  double nugget = 0.0;
};

struct FitOptions {
  MeanModel mean = MeanModel::constant;
  double relative_nugget = 0.0;  // nugget as a fraction of sigma, held fixed
  double nu_min = 0.05;
  double nu_max = 5.0;
  NelderMeadOptions optimizer{};
};

struct Prediction {
  double pred = 0.0;
  double se = 0.0;
};

namespace detail {

inline std::size_t trend_size(MeanModel m) { return m == MeanModel::constant ? 1 : 3; }

// Coordinates are centred on the site centroid for conditioning.
struct Trend {
  MeanModel model;
  Location centre;

  Eigen::RowVectorXd row(const Location& s) const {
    Eigen::RowVectorXd r(trend_size(model));
    r(0) = 1.0;
    if (model == MeanModel::linear) {
      r(1) = s.x - centre.x;
      r(2) = s.y - centre.y;
    }
    return r;
  }

  Eigen::MatrixXd matrix(std::span<const Location> sites) const {
    Eigen::MatrixXd f(sites.size(), trend_size(model));
    for (std::size_t i = 0; i < sites.size(); ++i) f.row(i) = row(sites[i]);
    return f;
  }
};

inline Trend make_trend(MeanModel m, std::span<const Location> sites) {
  Location c{0.0, 0.0};
  for (const auto& s : sites) {
    c.x += s.x / static_cast<double>(sites.size());
    c.y += s.y / static_cast<double>(sites.size());
  }
  return {m, c};
}

// Cholesky with diagonal jitter escalating 1e-12 .. 1e-8 (times scale) on failure.
inline std::optional<Eigen::LLT<Eigen::MatrixXd>> jittered_cholesky(Eigen::MatrixXd a, double scale) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return llt;
  double added = 0.0;
  for (double j = 1e-12; j <= 1.0001e-8; j *= 10.0) {
    a.diagonal().array() += (j - added) * scale;
    added = j;
    llt.compute(a);
    if (llt.info() == Eigen::Success) return llt;
  }
  return std::nullopt;
}

inline void check_sites(std::span<const Location> sites) {
  for (const auto& s : sites) validate(s);
  for (std::size_t i = 0; i < sites.size(); ++i)
    for (std::size_t j = i + 1; j < sites.size(); ++j)
      if (sites[i] == sites[j]) {
        throw ValidationError("duplicate sites " + std::to_string(i) + " and " + std::to_string(j));
      }
}

// Closest pair of sites, reported when a covariance matrix cannot be factorised.
inline std::string closest_pair(std::span<const Location> sites) {
  double best = std::numeric_limits<double>::infinity();
  std::size_t bi = 0, bj = 0;
  for (std::size_t i = 0; i < sites.size(); ++i)
    for (std::size_t j = i + 1; j < sites.size(); ++j)
      if (const double d = distance(sites[i], sites[j]); d < best) {
        best = d;
        bi = i;
        bj = j;
      }
  std::ostringstream os;
  os << "sites " << bi << " (" << sites[bi].x << ", " << sites[bi].y << ") and " << bj << " ("
     << sites[bj].x << ", " << sites[bj].y << "), distance " << best;
  return os.str();
}

struct Profile {
  double log_likelihood;
  double sigma;
};

// Log-likelihood maximised over the mean coefficients and sigma for fixed
// (rho, nu, relative nugget): sigma_hat = r' R^-1 r / m with GLS residuals r.
inline std::optional<Profile> profile_likelihood(const DistanceTable& table, const Eigen::MatrixXd& f,
                                                 const Eigen::VectorXd& y, double rho, double nu,
                                                 double tau) {
  Eigen::MatrixXd r = matern_correlation_matrix(table, rho, nu);
  r.diagonal().array() += tau;
  const auto llt = jittered_cholesky(std::move(r), 1.0);
  if (!llt) return std::nullopt;
  const auto& l = llt->matrixL();
  const Eigen::VectorXd yt = l.solve(y);
  const Eigen::MatrixXd ft = l.solve(f);
  const Eigen::VectorXd beta = (ft.transpose() * ft).ldlt().solve(ft.transpose() * yt);
  const Eigen::VectorXd resid = yt - ft * beta;
  const double m = static_cast<double>(y.size());
  const double sigma = resid.squaredNorm() / m;
  if (!(sigma > 0.0) || !std::isfinite(sigma)) return std::nullopt;
  const double logdet = llt->matrixLLT().diagonal().array().log().sum();
  const double ll = -0.5 * m * (std::log(2.0 * std::numbers::pi * sigma) + 1.0) - logdet;
  if (!std::isfinite(ll)) return std::nullopt;
  return Profile{ll, sigma};
}

}  // namespace detail

/// Gaussian log-likelihood at the given covariance parameters, with the mean
/// coefficients at their GLS estimate.
inline double log_likelihood(std::span<const Location> sites, std::span<const double> values,
                             const MaternParams& p, MeanModel mean = MeanModel::constant,
                             double nugget = 0.0) {
  validate(p);
  require(sites.size() == values.size(), "log_likelihood: sites/values length mismatch");
  const DistanceTable table(sites);
  const auto trend = detail::make_trend(mean, sites);
  Eigen::MatrixXd c = matern_correlation_matrix(table, p.rho, p.nu) * p.sigma;
  c.diagonal().array() += nugget;
  const auto llt = detail::jittered_cholesky(std::move(c), p.sigma);
  if (!llt) throw NumericalError("log_likelihood: covariance not positive definite");
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(values.data(), values.size());
  const Eigen::MatrixXd f = trend.matrix(sites);
  const auto& l = llt->matrixL();
  const Eigen::VectorXd yt = l.solve(y);
  const Eigen::MatrixXd ft = l.solve(f);
  const Eigen::VectorXd beta = (ft.transpose() * ft).ldlt().solve(ft.transpose() * yt);
  const double q = (yt - ft * beta).squaredNorm();
  const double m = static_cast<double>(values.size());
  return -0.5 * m * std::log(2.0 * std::numbers::pi) - llt->matrixLLT().diagonal().array().log().sum() -
         0.5 * q;
}

/// Maximum-likelihood Matern fit. sigma and the mean coefficients are profiled
/// out analytically; Nelder-Mead searches (log rho, log nu) from three fixed
/// starts and the best optimum is kept.
inline KrigingModel fit_ml(std::span<const Location> sites, std::span<const double> values,
                           const FitOptions& opt = {}) {
  const std::size_t m = sites.size();
  require(m == values.size(), "fit_ml: sites/values length mismatch");
  require(m >= 3, "fit_ml: at least 3 sites are required");
  require(m > detail::trend_size(opt.mean) + 1, "fit_ml: too few sites for the mean model");
  require(opt.relative_nugget >= 0.0, "fit_ml: nugget must be non-negative");
  require(opt.nu_min > 0.0 && opt.nu_min < opt.nu_max, "fit_ml: invalid smoothness bounds");
  for (double v : values) require(std::isfinite(v), "fit_ml: non-finite value");
  detail::check_sites(sites);
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  require(*hi > *lo, "fit_ml: all values are equal (zero variance)");

  const DistanceTable table(sites);
  const auto trend = detail::make_trend(opt.mean, sites);
  const Eigen::MatrixXd f = trend.matrix(sites);
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(values.data(), m);

  const double dmin = table.min_distance(), dmax = table.max_distance();
  const double log_rho_lo = std::log(1e-2 * dmin), log_rho_hi = std::log(1e2 * dmax);
  const double log_nu_lo = std::log(opt.nu_min), log_nu_hi = std::log(opt.nu_max);

  auto objective = [&](const std::vector<double>& x) {
    if (x[0] < log_rho_lo || x[0] > log_rho_hi || x[1] < log_nu_lo || x[1] > log_nu_hi) {
      return std::numeric_limits<double>::infinity();
    }
    const auto prof = detail::profile_likelihood(table, f, y, std::exp(x[0]), std::exp(x[1]),
                                                 opt.relative_nugget);
    return prof ? -prof->log_likelihood : std::numeric_limits<double>::infinity();
  };

  const double r0 = std::sqrt(dmin * dmax);
  const std::array<std::array<double, 2>, 3> starts = {{{0.5 * r0, 0.5}, {r0, 1.0}, {2.0 * r0, 2.0}}};
  std::optional<NelderMeadResult> best;
  for (const auto& s : starts) {
    std::vector<double> x0 = {std::log(s[0]), std::clamp(std::log(s[1]), log_nu_lo, log_nu_hi)};
    if (!std::isfinite(objective(x0))) continue;
    auto res = nelder_mead(objective, x0, opt.optimizer);
    if (std::isfinite(res.value) && (!best || res.value < best->value)) best = std::move(res);
  }
  if (!best) throw NumericalError("fit_ml: objective is non-finite at every start");

  const double rho = std::exp(best->x[0]), nu = std::exp(best->x[1]);
  const auto prof = detail::profile_likelihood(table, f, y, rho, nu, opt.relative_nugget);
  if (!prof) throw NumericalError("fit_ml: optimum could not be re-evaluated");

  KrigingModel model;
  model.params = {prof->sigma, rho, nu};
  model.mean = opt.mean;
  model.log_likelihood = prof->log_likelihood;
  model.sites.assign(sites.begin(), sites.end());
  model.nugget = opt.relative_nugget * prof->sigma;
  return model;
}

/// Factorised kriging system for a fixed model. Weights depend only on the
/// model and the target, so one predictor serves any number of value vectors.
class KrigingPredictor {
public:
  struct Weights {
    Eigen::VectorXd lambda;
    double variance = 0.0;
  };

  explicit KrigingPredictor(KrigingModel model)
      : model_(std::move(model)), trend_(detail::make_trend(model_.mean, model_.sites)) {
    validate(model_.params);
    require(model_.nugget >= 0.0, "kriging: nugget must be non-negative");
    const std::size_t m = model_.sites.size();
    require(m > detail::trend_size(model_.mean), "kriging: too few sites for the mean model");
    detail::check_sites(model_.sites);

    const DistanceTable table(model_.sites);
    Eigen::MatrixXd c = matern_correlation_matrix(table, model_.params.rho, model_.params.nu) *
                        model_.params.sigma;
    c.diagonal().array() += model_.nugget;
    auto llt = detail::jittered_cholesky(std::move(c), model_.params.sigma);
    if (!llt) {
      throw NumericalError("kriging: site covariance is singular after maximum jitter; offending pair: " +
                           detail::closest_pair(model_.sites));
    }
    llt_ = std::move(*llt);
    f_ = trend_.matrix(model_.sites);
    cinv_f_ = llt_.solve(f_);
    q_.compute(f_.transpose() * cinv_f_);
    if (q_.info() != Eigen::Success) throw NumericalError("kriging: trend system is singular");
  }

  const KrigingModel& model() const noexcept { return model_; }

  Weights weights(const Location& target) const {
    const auto& p = model_.params;
    const std::size_t m = model_.sites.size();
    Eigen::VectorXd c(m);
    for (std::size_t i = 0; i < m; ++i) {
      c(i) = p.sigma * matern_correlation(distance(target, model_.sites[i]), p.rho, p.nu);
    }
    const Eigen::VectorXd u = llt_.solve(c);
    const Eigen::VectorXd v = trend_.row(target).transpose() - f_.transpose() * u;
    const Eigen::VectorXd qv = q_.solve(v);
    Weights w;
    w.lambda = u + cinv_f_ * qv;
    w.variance = std::max(0.0, p.sigma - c.dot(u) + v.dot(qv));
    return w;
  }

  Prediction predict(std::span<const double> values, const Location& target) const {
    require(values.size() == model_.sites.size(), "kriging: values are not aligned with model sites");
    const auto w = weights(target);
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(values.data(), values.size());
    return {w.lambda.dot(y), std::sqrt(w.variance)};
  }

private:
  KrigingModel model_;
  detail::Trend trend_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::MatrixXd f_;
  Eigen::MatrixXd cinv_f_;
  Eigen::LDLT<Eigen::MatrixXd> q_;
};

inline std::vector<Prediction> krige_predict(const KrigingModel& model, std::span<const double> values,
                                             std::span<const Location> targets) {
  const KrigingPredictor predictor(model);
  std::vector<Prediction> out;
  out.reserve(targets.size());
  for (const auto& t : targets) out.push_back(predictor.predict(values, t));
  return out;
}

enum class Transform { none, logit };

inline Transform parse_transform(std::string_view s) {
  if (s == "none") return Transform::none;
  if (s == "logit") return Transform::logit;
  throw ValidationError("unknown transform '" + std::string(s) + "' (expected none or logit)");
}

inline std::string to_string(Transform t) { return t == Transform::none ? "none" : "logit"; }

/// Kriged probability map. `raw` is the prediction before clamping to [0, 1]
/// (identical to `pred` under the logit transform); `se` is on the scale the
/// kriging was done on.
struct KrigedField {
  GridSpec grid;
  std::vector<double> raw;
  std::vector<double> pred;
  std::vector<double> se;
  std::string label;
  Method method = Method::KER;
  Transform transform = Transform::none;
};

inline constexpr double kLogitEps = 1e-6;

inline double logit(double p) {
  p = std::clamp(p, kLogitEps, 1.0 - kLogitEps);
  return std::log(p / (1.0 - p));
}

inline double inv_logit(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Kriges `values` (probabilities at the model sites) onto every grid cell.
/// With the logit transform the correlation structure of `model` is kept and
/// sigma is re-estimated on the logit scale.
inline KrigedField krige_field(const KrigingModel& model, std::span<const double> values, const GridSpec& grid,
                               Transform transform = Transform::none) {
  validate(grid);
  require(values.size() == model.sites.size(), "krige_field: values are not aligned with model sites");
  const KrigingPredictor predictor(model);

  std::vector<double> y(values.begin(), values.end());
  double variance_scale = 1.0;
  if (transform == Transform::logit) {
    for (double& v : y) v = logit(v);
    const DistanceTable table(model.sites);
    const auto trend = detail::make_trend(model.mean, model.sites);
    const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), y.size());
    const auto prof = detail::profile_likelihood(table, trend.matrix(model.sites), yv, model.params.rho,
                                                 model.params.nu, model.nugget / model.params.sigma);
    variance_scale = prof ? prof->sigma / model.params.sigma : 0.0;
  }

  KrigedField field;
  field.grid = grid;
  field.transform = transform;
  const std::size_t cells = grid.cell_count();
  field.raw.resize(cells);
  field.pred.resize(cells);
  field.se.resize(cells);
  const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), y.size());
  for (std::size_t k = 0; k < cells; ++k) {
    const auto w = predictor.weights(grid.cell(k));
    const double z = w.lambda.dot(yv);
    field.se[k] = std::sqrt(w.variance * variance_scale);
    if (transform == Transform::logit) {
      field.raw[k] = field.pred[k] = inv_logit(z);
    } else {
      field.raw[k] = z;
      field.pred[k] = std::clamp(z, 0.0, 1.0);
    }
  }
  return field;
}

/// key=value text serialisation of a fitted model.
inline void write_model(std::ostream& os, const KrigingModel& m) {
  const auto old = os.precision(17);
  os << "sigma=" << m.params.sigma << '\n'
     << "rho=" << m.params.rho << '\n'
     << "nu=" << m.params.nu << '\n'
     << "nugget=" << m.nugget << '\n'
     << "mean=" << to_string(m.mean) << '\n'
     << "log_likelihood=" << m.log_likelihood << '\n'
     << "site_count=" << m.sites.size() << '\n';
  for (std::size_t i = 0; i < m.sites.size(); ++i)
    os << "site." << i << '=' << m.sites[i].x << ',' << m.sites[i].y << '\n';
  os.precision(old);
}

inline KrigingModel read_model(std::istream& is) {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(lineno, "expected key=value");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ValidationError("model file: missing key '" + key + "'");
    return it->second;
  };
  auto num = [&](const std::string& key) {
    try {
      return std::stod(get(key));
    } catch (const std::logic_error&) {
      throw ValidationError("model file: '" + key + "' is not a number");
    }
  };
  KrigingModel m;
  m.params = {num("sigma"), num("rho"), num("nu")};
  validate(m.params);
  m.nugget = num("nugget");
  m.mean = parse_mean_model(get("mean"));
  m.log_likelihood = num("log_likelihood");
  const auto count = static_cast<std::size_t>(num("site_count"));
  for (std::size_t i = 0; i < count; ++i) {
    const std::string& v = get("site." + std::to_string(i));
    const auto comma = v.find(',');
    if (comma == std::string::npos) throw ValidationError("model file: malformed site." + std::to_string(i));
    m.sites.push_back({std::stod(v.substr(0, comma)), std::stod(v.substr(comma + 1))});
  }
  return m;
}

}  // namespace exceed
