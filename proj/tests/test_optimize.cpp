#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "exceed/optimize.hpp"

using exceed::nelder_mead;

TEST(NelderMead, Quadratic) {
  auto f = [](const std::vector<double>& x) { return (x[0] - 1) * (x[0] - 1) + 4 * (x[1] + 2) * (x[1] + 2); };
  const auto r = nelder_mead(f, {0.0, 0.0}, {1e-14, 2000, 0.5});
  EXPECT_NEAR(r.x[0], 1.0, 1e-5);
  EXPECT_NEAR(r.x[1], -2.0, 1e-5);
  EXPECT_TRUE(r.converged);
}

TEST(NelderMead, Rosenbrock) {
  auto f = [](const std::vector<double>& x) {
    return 100 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1 - x[0], 2);
  };
  const auto r = nelder_mead(f, {-1.2, 1.0}, {1e-16, 5000, 0.5});
  EXPECT_NEAR(r.x[0], 1.0, 1e-4);
  EXPECT_NEAR(r.x[1], 1.0, 1e-4);
}

TEST(NelderMead, NonFiniteRegionsAreAvoided) {
  auto f = [](const std::vector<double>& x) {
    if (x[0] < 0.5) return std::numeric_limits<double>::quiet_NaN();
    return (x[0] - 2) * (x[0] - 2);
  };
  const auto r = nelder_mead(f, {1.0}, {});
  EXPECT_NEAR(r.x[0], 2.0, 1e-3);
}

TEST(NelderMead, IterationCapRespected) {
  auto f = [](const std::vector<double>& x) { return x[0] * x[0] + x[1] * x[1]; };
  const auto r = nelder_mead(f, {5.0, 5.0}, {0.0, 7, 0.5});
  EXPECT_LE(r.iterations, 7u);
  EXPECT_FALSE(r.converged);
}
