#pragma once

// Independent reference computations used by the unit and acceptance tests.
// None of these share code with the library.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

namespace oracle {

// K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt, trapezoid rule in t.
// The integrand is entire and decays double-exponentially, so the rule
// converges geometrically in the step size.
inline double bessel_k_quadrature(double nu, double x, double h = 2e-3) {
  long double sum = 0.5L * std::exp(-static_cast<long double>(x));
  for (std::size_t k = 1;; ++k) {
    const long double t = h * static_cast<long double>(k);
    const long double term = std::exp(-x * std::cosh(t) + nu * t) * 0.5L * (1.0L + std::exp(-2.0L * nu * t));
    sum += term;
    if (x * std::cosh(t) - nu * t > 800.0L) break;
  }
  return static_cast<double>(sum * h);
}

// Solves a x = b by Gaussian elimination with partial pivoting.
inline std::vector<double> dense_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  std::vector<std::vector<long double>> m(n, std::vector<long double>(n + 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m[i][j] = a[i][j];
    m[i][n] = b[i];
  }
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::fabs(m[r][c]) > std::fabs(m[p][c])) p = r;
    if (m[p][c] == 0.0L) throw std::runtime_error("dense_solve: singular");
    std::swap(m[p], m[c]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const long double f = m[r][c] / m[c][c];
      for (std::size_t j = c; j <= n; ++j) m[r][j] -= f * m[c][j];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    long double s = m[i][n];
    for (std::size_t j = i + 1; j < n; ++j) s -= m[i][j] * x[j];
    x[i] = static_cast<double>(s / m[i][i]);
  }
  return x;
}

// Plain Cholesky factor of a symmetric positive definite matrix (row-major).
inline std::vector<std::vector<double>> cholesky(const std::vector<std::vector<double>>& a) {
  const std::size_t n = a.size();
  std::vector<std::vector<double>> l(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      long double s = a[i][j];
      for (std::size_t k = 0; k < j; ++k) s -= static_cast<long double>(l[i][k]) * l[j][k];
      if (i == j) {
        if (s <= 0.0L) throw std::runtime_error("cholesky: not positive definite");
        l[i][i] = static_cast<double>(std::sqrt(s));
      } else {
        l[i][j] = static_cast<double>(s / l[j][j]);
      }
    }
  return l;
}

// Standard normal CDF through the complementary error function.
inline double phi(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace oracle
