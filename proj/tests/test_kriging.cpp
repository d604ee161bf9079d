#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "exceed/kriging.hpp"
#include "oracles.hpp"

using namespace exceed;

namespace {

std::vector<Location> random_sites(std::size_t m, std::mt19937_64& rng, double extent = 10.0) {
  std::uniform_real_distribution<double> u(0.0, extent);
  std::vector<Location> s(m);
  for (auto& p : s) p = {u(rng), u(rng)};
  return s;
}

KrigingModel model_at(std::vector<Location> sites, MaternParams p, MeanModel mean = MeanModel::constant) {
  KrigingModel m;
  m.params = p;
  m.mean = mean;
  m.sites = std::move(sites);
  return m;
}

}  // namespace

TEST(Predictor, ExactAtSites) {
  std::mt19937_64 rng(1);
  const auto sites = random_sites(8, rng);
  const std::vector<double> y{0.1, 0.5, 0.3, 0.9, 0.2, 0.4, 0.7, 0.6};
  const KrigingPredictor k(model_at(sites, {0.3, 3.0, 1.2}));
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const auto p = k.predict(y, sites[i]);
    EXPECT_NEAR(p.pred, y[i], 1e-10);
    EXPECT_NEAR(p.se, 0.0, 1e-6);
  }
}

TEST(Predictor, SymmetricPairAveragesValues) {
  const KrigingPredictor k(model_at({{0, 0}, {2, 0}}, {1.0, 1.0, 0.5}));
  EXPECT_NEAR(k.weights({1, 0}).lambda(0), 0.5, 1e-12);
  EXPECT_NEAR(k.weights({1, 0}).lambda(1), 0.5, 1e-12);
  EXPECT_NEAR(k.predict(std::vector<double>{0.2, 0.6}, {1, 0}).pred, 0.4, 1e-12);
}

TEST(Predictor, ConstantFieldReproduced) {
  std::mt19937_64 rng(2);
  const auto sites = random_sites(12, rng);
  const std::vector<double> y(12, 0.37);
  for (auto mean : {MeanModel::constant, MeanModel::linear}) {
    const KrigingPredictor k(model_at(sites, {1.0, 2.0, 0.8}, mean));
    for (double x = 0; x < 10; x += 2.5) EXPECT_NEAR(k.predict(y, {x, 10 - x}).pred, 0.37, 1e-10);
  }
}

TEST(Predictor, LinearTrendReproducedUnderUniversalKriging) {
  std::mt19937_64 rng(3);
  const auto sites = random_sites(10, rng);
  std::vector<double> y;
  for (const auto& s : sites) y.push_back(2.0 + 0.3 * s.x - 0.1 * s.y);
  const KrigingPredictor k(model_at(sites, {1.0, 2.0, 1.5}, MeanModel::linear));
  EXPECT_NEAR(k.predict(y, {4.2, 7.7}).pred, 2.0 + 0.3 * 4.2 - 0.1 * 7.7, 1e-9);
}

// Bordered system [C F; F' 0] [lambda; mu] = [c0; f0] solved independently.
TEST(Predictor, TriangleMatchesIndependentSolve) {
  const std::vector<Location> sites{{0, 0}, {3, 0}, {1, 2.5}};
  const Location target{1.2, 0.9};
  const MaternParams p{1.4, 2.2, 0.9};
  std::vector<std::vector<double>> a(4, std::vector<double>(4, 0.0));
  std::vector<double> b(4, 1.0);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) a[i][j] = matern_cov(distance(sites[i], sites[j]), p);
    a[i][3] = a[3][i] = 1.0;
    b[i] = matern_cov(distance(sites[i], target), p);
  }
  const auto sol = oracle::dense_solve(a, b);
  const auto w = KrigingPredictor(model_at(sites, p)).weights(target);
  double var = p.sigma;
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(w.lambda(i), sol[i], 1e-12);
    var -= 2 * sol[i] * b[i];
    for (int j = 0; j < 3; ++j) var += sol[i] * sol[j] * a[i][j];
  }
  EXPECT_NEAR(w.variance, var, 1e-12);
}

TEST(Predictor, WeightsSumToOneOnRandomConfigurations) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto sites = random_sites(5, rng);
    const KrigingPredictor k(model_at(sites, {1.0, 1.5, 0.5 + 0.05 * trial}));
    EXPECT_NEAR(k.weights({5.0, 5.0}).lambda.sum(), 1.0, 1e-10);
  }
}

TEST(Predictor, DuplicateSitesRejected) {
  EXPECT_THROW(KrigingPredictor(model_at({{0, 0}, {1, 1}, {0, 0}}, {1, 1, 1})), ValidationError);
}

// Numerically coincident sites are rescued by the jitter ladder.
TEST(Predictor, NearDuplicateSitesStillPredict) {
  const KrigingPredictor k(model_at({{0, 0}, {5, 5}, {0, 1e-13}, {9, 1}}, {1.0, 100.0, 5.0}));
  const auto p = k.predict(std::vector<double>{0.1, 0.5, 0.1, 0.9}, {4, 4});
  EXPECT_TRUE(std::isfinite(p.pred));
  EXPECT_TRUE(std::isfinite(p.se));
}

TEST(Predictor, ClosestPairIsReported) {
  const std::vector<Location> s{{0, 0}, {5, 5}, {0, 1e-13}, {9, 1}};
  const std::string msg = detail::closest_pair(s);
  EXPECT_EQ(msg.rfind("sites 0 (0, 0) and 2 (", 0), 0u) << msg;
}

TEST(Likelihood, ProfileMatchesFullLikelihoodAtOptimum) {
  std::mt19937_64 rng(5);
  const auto sites = random_sites(15, rng);
  std::normal_distribution<double> normal;
  std::vector<double> y(15);
  for (auto& v : y) v = normal(rng);
  const KrigingModel m = fit_ml(sites, y, {});
  EXPECT_NEAR(log_likelihood(sites, y, m.params, m.mean, m.nugget), m.log_likelihood, 1e-8);
  // sigma is profiled out, so perturbing it lowers the likelihood.
  MaternParams off = m.params;
  off.sigma *= 1.3;
  EXPECT_LT(log_likelihood(sites, y, off, m.mean, m.nugget), m.log_likelihood);
  off.sigma = m.params.sigma / 1.3;
  EXPECT_LT(log_likelihood(sites, y, off, m.mean, m.nugget), m.log_likelihood);
}

TEST(Fit, RecoversExponentialModel) {
  std::mt19937_64 rng(6);
  std::vector<double> sigma, rho;
  for (int rep = 0; rep < 20; ++rep) {
    const auto sites = random_sites(100, rng, 20.0);
    std::vector<std::vector<double>> c(100, std::vector<double>(100));
    for (int i = 0; i < 100; ++i)
      for (int j = 0; j < 100; ++j) c[i][j] = matern_cov(distance(sites[i], sites[j]), {1.0, 2.0, 0.5});
    const auto l = oracle::cholesky(c);
    std::normal_distribution<double> normal;
    std::vector<double> e(100), y(100, 0.0);
    for (auto& v : e) v = normal(rng);
    for (int i = 0; i < 100; ++i)
      for (int j = 0; j <= i; ++j) y[i] += l[i][j] * e[j];
    FitOptions opt;
    opt.nu_max = 0.5 + 1e-9;
    opt.nu_min = 0.5 - 1e-9;
    const auto m = fit_ml(sites, y, opt);
    sigma.push_back(m.params.sigma);
    rho.push_back(m.params.rho);
  }
  std::sort(sigma.begin(), sigma.end());
  std::sort(rho.begin(), rho.end());
  const double ms = 0.5 * (sigma[9] + sigma[10]), mr = 0.5 * (rho[9] + rho[10]);
  EXPECT_GT(ms, 0.5);
  EXPECT_LT(ms, 2.0);
  EXPECT_GT(mr, 1.0);
  EXPECT_LT(mr, 4.0);
}

TEST(Fit, InputValidation) {
  const std::vector<Location> s{{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  EXPECT_THROW(fit_ml(s, std::vector<double>{1, 1, 1, 1}, {}), ValidationError);
  EXPECT_THROW(fit_ml(s, std::vector<double>{1, 2, 3}, {}), ValidationError);
  EXPECT_THROW(fit_ml(std::vector<Location>{{0, 0}, {1, 0}}, std::vector<double>{1, 2}, {}), ValidationError);
  const std::vector<Location> dup{{0, 0}, {1, 0}, {0, 0}, {1, 1}};
  EXPECT_THROW(fit_ml(dup, std::vector<double>{1, 2, 3, 4}, {}), ValidationError);
}

TEST(Field, ConstantProbabilitiesGiveUniformMap) {
  const GridSpec g{6, 5, {0, 0}, 1.0};
  const auto m = model_at({{0.5, 0.5}, {4, 1}, {2, 3.5}, {5, 4}}, {1.0, 2.0, 1.0});
  const std::vector<double> y(4, 0.42);
  for (auto t : {Transform::none, Transform::logit}) {
    const auto f = krige_field(m, y, g, t);
    ASSERT_EQ(f.pred.size(), 30u);
    for (double v : f.pred) EXPECT_NEAR(v, 0.42, 1e-9);
  }
}

TEST(Field, NegativeRawPredictionIsClampedButKept) {
  const GridSpec g{1, 1, {3, 0}, 1.0};
  // Linear trend through (0, .2), (1, .1), (2, 0) extrapolates below zero at x = 3.
  const auto m = model_at({{0, 0}, {1, 0}, {2, 0}, {1, 1}}, {1.0, 0.5, 0.5}, MeanModel::linear);
  const auto f = krige_field(m, std::vector<double>{0.2, 0.1, 0.0, 0.1}, g, Transform::none);
  EXPECT_LT(f.raw[0], 0.0);
  EXPECT_EQ(f.pred[0], 0.0);
}

TEST(Field, LogitStaysInUnitInterval) {
  const GridSpec g{8, 8, {0, 0}, 1.0};
  const auto m = model_at({{0, 0}, {7, 0}, {0, 7}, {7, 7}, {3, 4}}, {1.0, 3.0, 1.0});
  const auto f = krige_field(m, std::vector<double>{0.0, 1.0, 0.02, 0.99, 0.5}, g, Transform::logit);
  for (double v : f.pred) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Model, TextRoundTrip) {
  auto m = model_at({{0.25, 1.0 / 3.0}, {2, 5}}, {0.7, 1.0 / 7.0, 2.5}, MeanModel::linear);
  m.nugget = 1e-3;
  m.log_likelihood = -12.75;
  std::stringstream ss;
  write_model(ss, m);
  const auto r = read_model(ss);
  EXPECT_EQ(r.params.rho, m.params.rho);
  EXPECT_EQ(r.params.nu, m.params.nu);
  EXPECT_EQ(r.mean, MeanModel::linear);
  EXPECT_EQ(r.sites[0].y, 1.0 / 3.0);
  EXPECT_EQ(r.nugget, 1e-3);
}

TEST(Fit, LikelihoodAtLeastTrueParameters) {
  std::mt19937_64 rng(8);
  const auto sites = random_sites(40, rng);
  const MaternParams truth{1.0, 2.0, 0.5};
  std::vector<std::vector<double>> c(40, std::vector<double>(40));
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 40; ++j) c[i][j] = matern_cov(distance(sites[i], sites[j]), truth);
  const auto l = oracle::cholesky(c);
  std::normal_distribution<double> normal;
  std::vector<double> e(40), y(40, 0.0);
  for (auto& v : e) v = normal(rng);
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j <= i; ++j) y[i] += l[i][j] * e[j];
  const auto m = fit_ml(sites, y, {});
  EXPECT_GE(m.log_likelihood, log_likelihood(sites, y, truth, MeanModel::constant, 0.0));
}
