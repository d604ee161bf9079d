#pragma once

// Gamma, modified Bessel K_nu, and the standard normal CDF / quantile.

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "exceed/error.hpp"

namespace exceed {

inline double gamma_fn(double z) {
  if (!(z > 0.0) || !std::isfinite(z)) {
    throw ValidationError("gamma_fn: argument must be positive and finite, got " + std::to_string(z));
  }
  const double g = std::tgamma(z);
  if (!std::isfinite(g)) throw NumericalError("gamma_fn: overflow at z = " + std::to_string(z));
  return g;
}

namespace detail {

// Taylor coefficients c_k of 1/Gamma(z) = sum_k c_k z^k, k = 1..26.
inline constexpr std::array<double, 26> kRecipGammaCoeffs = {
    1.0,
    0.57721566490153286,
    -0.65587807152025388,
    -0.042002635034095236,
    0.16653861138229149,
    -0.042197734555544337,
    -0.0096219715278769736,
    0.0072189432466630995,
    -0.0011651675918590651,
    -0.00021524167411495097,
    0.00012805028238811619,
    -2.0134854780788239e-5,
    -1.2504934821426707e-6,
    1.1330272319816959e-6,
    -2.0563384169776071e-7,
    6.1160951044814158e-9,
    5.0020076444692229e-9,
    -1.1812745704870201e-9,
    1.0434267116911005e-10,
    7.7822634399050713e-12,
    -3.6968056186422057e-12,
    5.100370287454476e-13,
    -2.0583260535665068e-14,
    -5.348122539423018e-15,
    1.2267786282382608e-15,
    -1.1812593016974588e-16,
};

struct TemmeGammas {
  double gam1;    // (1/G(1-mu) - 1/G(1+mu)) / (2 mu)
  double gam2;    // (1/G(1-mu) + 1/G(1+mu)) / 2
  double gampl;   // 1/G(1+mu)
  double gammi;   // 1/G(1-mu)
};

// Valid for |mu| <= 1/2. Evaluated from the series so gam1 has no cancellation.
inline TemmeGammas temme_gammas(double mu) {
  const auto& c = kRecipGammaCoeffs;
  // 1/G(1+mu) = sum_k c_k mu^(k-1); even k contribute to gam1, odd k to gam2.
  double gam1 = 0.0, gam2 = 0.0;
  double p = 1.0;  // mu^(k-1) for odd k, walking in steps of mu^2
  for (std::size_t k = 1; k <= c.size(); k += 2) {
    gam2 += c[k - 1] * p;
    if (k < c.size()) gam1 -= c[k] * p;
    p *= mu * mu;
  }
  return {gam1, gam2, gam2 - mu * gam1, gam2 + mu * gam1};
}

}  // namespace detail

/// Modified Bessel function of the second kind, K_nu(x), for nu >= 0, x > 0.
///
/// Temme's series for x < 2 and Steed's continued fraction (Temme's CF2)
/// otherwise, both at fractional order |mu| <= 1/2; the integer part of the
/// order is reached by forward recurrence, which is stable for K.
inline double bessel_k(double nu, double x) {
  constexpr double kEps = 1e-16;
  constexpr int kMaxIter = 10000;
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw ValidationError("bessel_k: argument must be positive and finite, got x = " + std::to_string(x));
  }
  nu = std::abs(nu);  // K_{-nu} = K_nu
  if (!std::isfinite(nu)) throw ValidationError("bessel_k: order must be finite");

  const int nl = static_cast<int>(nu + 0.5);
  const double mu = nu - nl;
  const double mu2 = mu * mu;
  const double xi = 1.0 / x;
  const double xi2 = 2.0 * xi;
  double kmu = 0.0, k1 = 0.0;

  if (x < 2.0) {
    const double x2 = 0.5 * x;
    const double pimu = std::numbers::pi * mu;
    const double fact = std::abs(pimu) < kEps ? 1.0 : pimu / std::sin(pimu);
    double d = -std::log(x2);
    double e = mu * d;
    const double fact2 = std::abs(e) < kEps ? 1.0 : std::sinh(e) / e;
    const auto g = detail::temme_gammas(mu);
    double ff = fact * (g.gam1 * std::cosh(e) + g.gam2 * fact2 * d);
    double sum = ff;
    e = std::exp(e);
    double p = 0.5 * e / g.gampl;
    double q = 0.5 / (e * g.gammi);
    double c = 1.0;
    d = x2 * x2;
    double sum1 = p;
    int i = 1;
    for (; i <= kMaxIter; ++i) {
      ff = (i * ff + p + q) / (i * i - mu2);
      c *= d / i;
      p /= i - mu;
      q /= i + mu;
      const double del = c * ff;
      sum += del;
      sum1 += c * (p - i * ff);
      if (std::abs(del) < std::abs(sum) * kEps) break;
    }
    if (i > kMaxIter) throw NumericalError("bessel_k: series failed to converge");
    kmu = sum;
    k1 = sum1 * xi2;
  } else {
    double b = 2.0 * (1.0 + x);
    double d = 1.0 / b;
    double h = d, delh = d;
    double q1 = 0.0, q2 = 1.0;
    const double a1 = 0.25 - mu2;
    double q = a1, c = a1;
    double a = -a1;
    double s = 1.0 + q * delh;
    int i = 2;
    for (; i <= kMaxIter; ++i) {
      a -= 2 * (i - 1);
      c = -a * c / i;
      const double qnew = (q1 - b * q2) / a;
      q1 = q2;
      q2 = qnew;
      q += c * qnew;
      b += 2.0;
      d = 1.0 / (b + a * d);
      delh = (b * d - 1.0) * delh;
      h += delh;
      const double dels = q * delh;
      s += dels;
      if (std::abs(dels / s) < kEps) break;
    }
    if (i > kMaxIter) throw NumericalError("bessel_k: continued fraction failed to converge");
    h = a1 * h;
    kmu = std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x) / s;
    k1 = kmu * (mu + x + 0.5 - h) * xi;
  }

  for (int i = 1; i <= nl; ++i) {
    const double next = (mu + i) * xi2 * k1 + kmu;
    kmu = k1;
    k1 = next;
  }
  if (!std::isfinite(kmu)) {
    throw NumericalError("bessel_k: overflow at nu = " + std::to_string(nu) + ", x = " + std::to_string(x));
  }
  return kmu;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

/// Inverse standard normal CDF: Acklam's rational approximation followed by
/// one Halley step against erfc, giving near machine precision.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw ValidationError("normal_quantile: probability must lie in (0, 1), got " + std::to_string(p));
  }
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

}  // namespace exceed
