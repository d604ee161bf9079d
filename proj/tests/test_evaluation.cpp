#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "exceed/csv_io.hpp"
#include "exceed/evaluation.hpp"

using namespace exceed;

TEST(Rmse, Basics) {
  const std::vector<double> a{0.2, 0.4}, b{0.0, 0.0};
  EXPECT_NEAR(rmse_time(a, b), 0.316227766016837942, 1e-15);
  EXPECT_EQ(rmse_time(a, a), 0.0);
  const std::vector<double> c{0.25, 0.45};
  EXPECT_NEAR(rmse_time(c, a), 0.05, 1e-15);
  EXPECT_THROW(rmse_time(a, std::vector<double>{1.0}), ValidationError);
}

TEST(Summary, MeanSd) {
  const std::vector<double> v{1, 2, 3, 4};
  const auto ms = mean_sd(v);
  EXPECT_DOUBLE_EQ(ms.mean, 2.5);
  EXPECT_NEAR(ms.sd, std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_EQ(mean_sd(std::vector<double>{7}).sd, 0.0);
  EXPECT_DOUBLE_EQ(median({3, 1, 2, 10}), 2.5);
}

TEST(Seasons, Presets) {
  EXPECT_TRUE(summer().contains(parse_iso_date("2004-04-01")));
  EXPECT_TRUE(summer().contains(parse_iso_date("2004-09-30")));
  EXPECT_FALSE(summer().contains(parse_iso_date("2004-10-01")));
  EXPECT_TRUE(winter().contains(parse_iso_date("2004-03-31")));
  const auto r = parse_season("2004-01-05..2004-01-07");
  EXPECT_TRUE(r.contains(parse_iso_date("2004-01-07")));
  EXPECT_FALSE(r.contains(parse_iso_date("2004-01-08")));
  EXPECT_THROW(parse_season("spring"), ValidationError);
}

namespace {

KrigedField flat(double v) {
  KrigedField f;
  f.grid = {2, 2, {0, 0}, 1.0};
  f.raw.assign(4, v);
  f.pred.assign(4, v);
  f.se.assign(4, 0.1);
  return f;
}

}  // namespace

TEST(Seasons, Averaging) {
  const std::vector<KrigedField> fields{flat(0.2), flat(0.4), flat(0.9)};
  const std::vector<Date> days{parse_iso_date("2004-05-01"), parse_iso_date("2004-05-02"),
                               parse_iso_date("2004-12-01")};
  const auto avg = seasonal_average(fields, days, summer());
  for (double v : avg.pred) EXPECT_NEAR(v, 0.3, 1e-15);
  for (double v : avg.se) EXPECT_NEAR(v, 0.1, 1e-15);
  const auto single = seasonal_average(fields, days, winter());
  EXPECT_EQ(single.pred, fields[2].pred);
  EXPECT_THROW(seasonal_average(fields, days, parse_season("2005-01-01..2005-02-01")), ValidationError);
}

TEST(KrigeToTarget, ConstantDaysReproducedWithoutFitting) {
  const std::vector<Location> sites{{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  Eigen::MatrixXd est(4, 3);
  est.col(0).setConstant(0.25);
  est.col(1).setConstant(0.0);
  est.col(2).setConstant(1.0);
  for (auto mode : {FitMode::per_day, FitMode::time_averaged}) {
    const auto p = krige_to_target(sites, est, {0.3, 0.6}, {mode, {}});
    EXPECT_NEAR(p[0], 0.25, 1e-12);
    EXPECT_NEAR(p[1], 0.0, 1e-12);
    EXPECT_NEAR(p[2], 1.0, 1e-12);
  }
}

TEST(Crossval, SpatiallyConstantDataHasZeroError) {
  StationSet set;
  set.grid = TimeGrid::daily(parse_iso_date("2001-01-01"), 30);
  std::vector<double> v(30);
  for (std::size_t t = 0; t < 30; ++t) v[t] = std::sin(0.4 * t);
  for (int i = 0; i < 6; ++i) set.stations.push_back(make_series("s" + std::to_string(i), {double(i), double(i % 3)}, v));
  for (auto m : {Method::IND, Method::EDF, Method::KER}) {
    SmootherConfig cfg;
    cfg.method = m;
    for (const auto& r : loo_crossval(set, 0.0, cfg, {})) EXPECT_NEAR(r.rmse, 0.0, 1e-9);
  }
}

TEST(RateCheck, ConstantTruthErrorShrinks) {
  const std::vector<std::size_t> ns{200, 800, 3200};
  const auto r = rate_check(ns, 1.0, 60, 17);
  EXPECT_GT(r.rmse[0], r.rmse[1]);
  EXPECT_GT(r.rmse[1], r.rmse[2]);
  EXPECT_LT(r.slope, 0.0);
  EXPECT_FALSE(r.wide_tolerance);
}

TEST(RateCheck, SingleReplicateFlagsWideTolerance) {
  const std::vector<std::size_t> ns{100, 200, 400};
  EXPECT_TRUE(rate_check(ns, 1.0, 1, 3).wide_tolerance);
  const std::vector<std::size_t> two{100, 200, 200};
  EXPECT_THROW(rate_check(two, 1.0, 5, 3), ValidationError);
}

TEST(Normality, MomentsAreComputed) {
  const auto r = normality_check(400, 1.0, 100, 8);
  EXPECT_NEAR(r.mean, 0.5, 0.05);
  EXPECT_GT(r.sd, 0.0);
  EXPECT_LT(std::abs(r.skewness), 1.0);
}

namespace {

ExperimentConfig small_experiment() {
  ExperimentConfig c;
  c.reps = 3;
  c.scenario.grid = {6, 6, {0, 0}, 1.0};
  c.scenario.n_time = 40;
  c.m_values = {8, 36};
  c.per_day_refit_max_m = 10;
  c.seed = 7;
  return c;
}

}  // namespace

TEST(Experiment, DeterministicAcrossParallelism) {
  auto c = small_experiment();
  const auto a = run_table1(c);
  c.parallel = 3;
  const auto b = run_table1(c);
  std::ostringstream sa, sb, ta, tb;
  write_report_csv(sa, a);
  write_report_csv(sb, b);
  write_report_table(ta, a);
  write_report_table(tb, b);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(ta.str(), tb.str());
  EXPECT_EQ(a.succeeded, 3u);
  EXPECT_EQ(a.cells.size(), 3u * 2u * 2u);
}

TEST(Experiment, ReportEchoesScenario) {
  const auto rep = run_table1(small_experiment());
  std::ostringstream t, csv;
  write_report_table(t, rep);
  write_report_csv(csv, rep);
  EXPECT_NE(t.str().find("sigma_T2=0.7 alpha=0.2 sigma_S2=1.3 gamma=0.5"), std::string::npos);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "method,threshold,m,mean_rmse,sd_rmse,R,seed");
  for (const auto& c : rep.cells) {
    EXPECT_GE(c.rmse.mean, 0.0);
    EXPECT_LE(c.rmse.mean, c.raw_rmse.mean + 1e-15);
  }
}

TEST(Experiment, RejectsBadConfig) {
  auto c = small_experiment();
  c.m_values = {37};
  EXPECT_THROW(run_table1(c), ValidationError);
  c = small_experiment();
  c.reps = 0;
  EXPECT_THROW(run_table1(c), ValidationError);
}
