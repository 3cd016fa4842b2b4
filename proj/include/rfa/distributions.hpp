#pragma once

#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>

#include "rfa/error.hpp"
#include "rfa/panel.hpp"
#include "rfa/random.hpp"

namespace rfa {

namespace detail {

inline void check_stable(double alpha, double beta, double gamma) {
  if (!(alpha > 0.0 && alpha <= 2.0)) throw Error(ErrorKind::InvalidParameter, "stable alpha must lie in (0,2]");
  if (!(beta >= -1.0 && beta <= 1.0)) throw Error(ErrorKind::InvalidParameter, "stable beta must lie in [-1,1]");
  if (!(gamma > 0.0)) throw Error(ErrorKind::InvalidParameter, "stable gamma must be positive");
}

}  // namespace detail

/// One draw from S_alpha(beta, gamma, delta), 1-parameterization
/// (Chambers-Mallows-Stuck). alpha = 2 gives N(delta, 2 gamma^2).
inline double draw_stable(double alpha, double beta, double gamma, double delta, Rng& rng) {
  constexpr double pi = std::numbers::pi;
  std::uniform_real_distribution<double> unif(-pi / 2.0, pi / 2.0);
  std::exponential_distribution<double> expo(1.0);
  double v = unif(rng);
  while (v == -pi / 2.0) v = unif(rng);
  const double w = expo(rng);
  if (alpha == 1.0) {
    const double a = pi / 2.0 + beta * v;
    const double z = (2.0 / pi) * (a * std::tan(v) - beta * std::log((pi / 2.0) * w * std::cos(v) / a));
    return gamma * z + (2.0 / pi) * beta * gamma * std::log(gamma) + delta;
  }
  const double t = beta * std::tan(pi * alpha / 2.0);
  const double b = std::atan(t) / alpha;
  const double s = std::pow(1.0 + t * t, 1.0 / (2.0 * alpha));
  const double z = s * std::sin(alpha * (v + b)) / std::pow(std::cos(v), 1.0 / alpha) *
                   std::pow(std::cos(v - alpha * (v + b)) / w, (1.0 - alpha) / alpha);
  return gamma * z + delta;
}

inline Vector sample_stable(double alpha, double beta, double gamma, double delta, Eigen::Index n, Rng& rng) {
  detail::check_stable(alpha, beta, gamma);
  if (n < 0) throw Error(ErrorKind::InvalidParameter, "negative sample size");
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) out(i) = draw_stable(alpha, beta, gamma, delta, rng);
  return out;
}

/// dim x n draws of t_nu(0, I): each column is Z / sqrt(chi2_nu / nu) with a
/// single chi-square shared by the whole column.
inline Matrix sample_mvt(double nu, Eigen::Index dim, Eigen::Index n, Rng& rng) {
  if (!(nu > 0.0)) throw Error(ErrorKind::InvalidParameter, "t degrees of freedom must be positive");
  std::normal_distribution<double> norm;
  std::chi_squared_distribution<double> chi(nu);
  Matrix out(dim, n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const double scale = 1.0 / std::sqrt(chi(rng) / nu);
    for (Eigen::Index i = 0; i < dim; ++i) out(i, t) = norm(rng) * scale;
  }
  return out;
}

/// Density at zero of the symmetric law S_alpha(0, gamma, 0).
inline double symmetric_stable_pdf0(double alpha, double gamma) {
  detail::check_stable(alpha, 0.0, gamma);
  return std::tgamma(1.0 + 1.0 / alpha) / (std::numbers::pi * gamma);
}

/// CDF of S_alpha(beta, gamma, delta) at x by Gil-Pelaez inversion of the
/// characteristic function.
inline double stable_cdf(double x, double alpha, double beta = 0.0, double gamma = 1.0, double delta = 0.0) {
  detail::check_stable(alpha, beta, gamma);
  constexpr double pi = std::numbers::pi;
  // At alpha = 1 rescaling shifts the location by (2/pi) beta gamma log gamma.
  const double shift = alpha == 1.0 ? (2.0 / pi) * beta * gamma * std::log(gamma) : 0.0;
  const double z = (x - delta - shift) / gamma;
  // Standardized law: log phi(t) = -|t|^a (1 - i beta sgn(t) w(t)).
  auto integrand = [&](double t) {
    if (t == 0.0) return -z;  // Gauss-Kronrod never samples the endpoint
    const double ta = std::pow(t, alpha);
    double phase;
    if (alpha == 1.0) {
      phase = -t * z - ta * beta * (2.0 / pi) * std::log(t);
    } else {
      phase = -t * z + ta * beta * std::tan(pi * alpha / 2.0);
    }
    return std::exp(-ta) * std::sin(phase) / t;
  };
  const double upper = std::pow(60.0, 1.0 / alpha);
  double err = 0.0;
  const double integral =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, upper, 20, 1e-13, &err);
  return 0.5 - integral / pi;
}

/// Density of the symmetric law S_alpha(0, gamma, 0) at x.
inline double symmetric_stable_pdf(double x, double alpha, double gamma = 1.0) {
  detail::check_stable(alpha, 0.0, gamma);
  if (x == 0.0) return symmetric_stable_pdf0(alpha, gamma);
  const double z = x / gamma;
  auto integrand = [&](double t) { return std::exp(-std::pow(t, alpha)) * std::cos(t * z); };
  const double upper = std::pow(60.0, 1.0 / alpha);
  double err = 0.0;
  const double integral =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, upper, 20, 1e-13, &err);
  return integral / (std::numbers::pi * gamma);
}

/// Quantile of the symmetric law S_alpha(0, gamma, 0).
inline double symmetric_stable_quantile(double q, double alpha, double gamma = 1.0) {
  detail::check_stable(alpha, 0.0, gamma);
  if (!(q > 0.0 && q < 1.0)) throw Error(ErrorKind::InvalidParameter, "quantile level must lie in (0,1)");
  if (q == 0.5) return 0.0;
  if (alpha == 2.0) return gamma * std::sqrt(2.0) * boost::math::quantile(boost::math::normal(), q);
  if (alpha == 1.0) return gamma * std::tan(std::numbers::pi * (q - 0.5));
  const double sign = q > 0.5 ? 1.0 : -1.0;
  const double qq = q > 0.5 ? q : 1.0 - q;
  auto f = [&](double x) { return stable_cdf(x, alpha) - qq; };
  double hi = 1.0;
  while (f(hi) < 0.0) hi *= 2.0;
  std::uintmax_t iters = 200;
  const auto bracket = boost::math::tools::toms748_solve(f, 0.0, hi, boost::math::tools::eps_tolerance<double>(50),
                                                         iters);
  return sign * gamma * 0.5 * (bracket.first + bracket.second);
}

inline double normal_quantile(double q) { return boost::math::quantile(boost::math::normal(), q); }
inline double normal_pdf(double x) { return boost::math::pdf(boost::math::normal(), x); }
inline double student_quantile(double q, double nu) {
  return boost::math::quantile(boost::math::students_t(nu), q);
}
inline double student_pdf(double x, double nu) { return boost::math::pdf(boost::math::students_t(nu), x); }

}  // namespace rfa
