#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "rfa/dgp.hpp"
#include "rfa/error.hpp"
#include "rfa/panel.hpp"

namespace rfa {

/// ||L F - L0 F0||_F^2 / ||L0 F0||_F^2.
inline double mee_cc_single(const FactorFit& fit, const Matrix& L0, const Matrix& F0) {
  const Matrix truth = L0 * F0;
  const Matrix est = fit.common();
  if (est.rows() != truth.rows() || est.cols() != truth.cols())
    throw Error(ErrorKind::InvalidParameter, "fit and truth shapes differ");
  const double denom = truth.squaredNorm();
  if (denom == 0.0) throw Error(ErrorKind::ZeroTruth, "true common component is zero");
  return (est - truth).squaredNorm() / denom;
}

/// D between the fitted and true loading spaces (columns orthonormalized first).
inline double loading_distance(const FactorFit& fit, const Matrix& L0) { return space_distance(fit.loadings, L0); }

/// D between the fitted and true score spaces, taken over the T x r transposes.
inline double score_distance(const FactorFit& fit, const Matrix& F0) {
  return space_distance(fit.scores.transpose(), F0.transpose());
}

inline double ave_fl(std::span<const FactorFit> fits, std::span<const Matrix> L0s) {
  if (fits.empty() || fits.size() != L0s.size()) throw Error(ErrorKind::EmptyInput, "need one truth per fit");
  double s = 0.0;
  for (std::size_t m = 0; m < fits.size(); ++m) s += loading_distance(fits[m], L0s[m]);
  return s / static_cast<double>(fits.size());
}

inline double ave_fs(std::span<const FactorFit> fits, std::span<const Matrix> F0s) {
  if (fits.empty() || fits.size() != F0s.size()) throw Error(ErrorKind::EmptyInput, "need one truth per fit");
  double s = 0.0;
  for (std::size_t m = 0; m < fits.size(); ++m) s += score_distance(fits[m], F0s[m]);
  return s / static_cast<double>(fits.size());
}

/// Linear-interpolation sample quantile (Hyndman-Fan type 7).
inline double sample_quantile(std::vector<double> x, double q) {
  if (x.empty()) throw Error(ErrorKind::EmptyInput, "quantile of an empty sample");
  std::sort(x.begin(), x.end());
  const double h = q * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

struct Summary {
  double median = 0.0;
  double iqr = 0.0;
  double mean = 0.0;
  double sd = 0.0;
};

inline Summary summarize(const std::vector<double>& x) {
  if (x.empty()) throw Error(ErrorKind::EmptyInput, "summary of an empty sample");
  Summary s;
  s.median = sample_quantile(x, 0.5);
  s.iqr = sample_quantile(x, 0.75) - sample_quantile(x, 0.25);
  double sum = 0.0;
  for (double v : x) sum += v;
  s.mean = sum / static_cast<double>(x.size());
  if (x.size() > 1) {
    double ss = 0.0;
    for (double v : x) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(x.size() - 1));
  }
  return s;
}

// Coefficient on the score term in the first-order expansions. The standard
// quantile-regression expansion of argmin sum rho_tau(eps - l'd) is
// d = -(sum h l l')^{-1} sum l D with D = 1{eps <= 0} - tau.
inline constexpr double kBahadurCoefficient = -1.0;

struct BahadurReport {
  double ratio = 0.0;
  double regime = 0.0;  // factor side: p log^2 p / T; loading side: the stricter rate condition
  Matrix w0;
};

namespace detail {

inline double median_of(std::vector<double> v) { return sample_quantile(std::move(v), 0.5); }

inline void require_density(const SimulatedPanel& sim) {
  if (sim.h0.hasNaN())
    throw Error(ErrorKind::InvalidParameter, "densities at zero are not available for this design");
}

// Deviations at the level of the solver tolerance count as zero (0/0 -> 0).
inline double ratio_or_zero(double num, double den, double scale) {
  if (den <= 1e-6 * (1.0 + scale)) return 0.0;
  return num / den;
}

}  // namespace detail

/// Median over t of ||f_t - W0 f0_t - correction_t|| divided by the median of
/// ||f_t - W0 f0_t||; small values support the linear expansion.
inline BahadurReport bahadur_factor_check(const FactorFit& fit, const SimulatedPanel& sim,
                                          double coefficient = kBahadurCoefficient) {
  detail::require_density(sim);
  const Matrix& L = fit.loadings;
  const Eigen::Index p = L.rows();
  const Eigen::Index T = fit.scores.cols();
  const Eigen::Index r = L.cols();
  const bool noiseless = !sim.h0.allFinite();
  const Vector h = noiseless ? Vector::Ones(p) : sim.h0;
  BahadurReport rep;
  rep.w0 = compute_w0(L, sim.L0, h).w;
  const double pd = static_cast<double>(p);
  rep.regime = pd * std::log(pd) * std::log(pd) / static_cast<double>(T);

  Matrix gram = Matrix::Zero(r, r);
  for (Eigen::Index i = 0; i < p; ++i) gram += h(i) * L.row(i).transpose() * L.row(i);
  const Eigen::LDLT<Matrix> solver(gram);
  std::vector<double> num(static_cast<std::size_t>(T));
  std::vector<double> den(static_cast<std::size_t>(T));
  double scale = 0.0;
  for (Eigen::Index t = 0; t < T; ++t) {
    const Vector dev = fit.scores.col(t) - rep.w0 * sim.F0.col(t);
    Vector corr = Vector::Zero(r);
    if (!noiseless) {
      Vector s = Vector::Zero(r);
      for (Eigen::Index i = 0; i < p; ++i) {
        const double D = (sim.epsilon(i, t) <= 0.0 ? 1.0 : 0.0) - fit.tau;
        s += D * L.row(i).transpose();
      }
      corr = coefficient * solver.solve(s);
    }
    num[static_cast<std::size_t>(t)] = (dev - corr).norm();
    den[static_cast<std::size_t>(t)] = dev.norm();
    scale = std::max(scale, fit.scores.col(t).norm());
  }
  rep.ratio = detail::ratio_or_zero(detail::median_of(num), detail::median_of(den), scale);
  return rep;
}

/// Loading-side mirror: l_i - W0^{-T} l0_i against
/// (coefficient / h_i) (sum f f')^{-1} sum_t f_t D_it, median over i.
inline BahadurReport bahadur_loading_check(const FactorFit& fit, const SimulatedPanel& sim,
                                           double coefficient = kBahadurCoefficient) {
  detail::require_density(sim);
  const Matrix& L = fit.loadings;
  const Matrix& F = fit.scores;
  const Eigen::Index p = L.rows();
  const Eigen::Index T = F.cols();
  const bool noiseless = !sim.h0.allFinite();
  const Vector h = noiseless ? Vector::Ones(p) : sim.h0;
  BahadurReport rep;
  rep.w0 = compute_w0(L, sim.L0, h).w;
  const Matrix wl = rep.w0.transpose().fullPivLu().inverse();
  const double pd = static_cast<double>(p);
  const double Td = static_cast<double>(T);
  const double lp = std::log(pd);
  const double lT = std::log(Td);
  rep.regime = (lp * lp * lT * lT + lT * lT * lT / std::sqrt(pd)) * Td / pd + std::pow(lp, 5) / std::sqrt(Td);

  const Eigen::LDLT<Matrix> solver(Matrix(F * F.transpose()));
  std::vector<double> num(static_cast<std::size_t>(p));
  std::vector<double> den(static_cast<std::size_t>(p));
  double scale = 0.0;
  for (Eigen::Index i = 0; i < p; ++i) {
    const Vector dev = L.row(i).transpose() - wl * sim.L0.row(i).transpose();
    Vector corr = Vector::Zero(L.cols());
    if (!noiseless) {
      Vector s = Vector::Zero(L.cols());
      for (Eigen::Index t = 0; t < T; ++t) {
        const double D = (sim.epsilon(i, t) <= 0.0 ? 1.0 : 0.0) - fit.tau;
        s += D * F.col(t);
      }
      corr = (coefficient / h(i)) * solver.solve(s);
    }
    num[static_cast<std::size_t>(i)] = (dev - corr).norm();
    den[static_cast<std::size_t>(i)] = dev.norm();
    scale = std::max(scale, L.row(i).norm());
  }
  rep.ratio = detail::ratio_or_zero(detail::median_of(num), detail::median_of(den), scale);
  return rep;
}

namespace detail {

template <class Fn>
double r2_generic(const Matrix& pred, const Matrix& actual, Fn&& loss) {
  if (pred.rows() != actual.rows() || pred.cols() != actual.cols())
    throw Error(ErrorKind::InvalidParameter, "prediction and actual shapes differ");
  double res = 0.0;
  double tot = 0.0;
  for (Eigen::Index j = 0; j < actual.size(); ++j) {
    res += loss(actual.data()[j] - pred.data()[j]);
    tot += loss(actual.data()[j]);
  }
  if (tot == 0.0) throw Error(ErrorKind::ZeroDenominator, "total sum is zero");
  return 1.0 - res / tot;
}

}  // namespace detail

inline double r2_square(const Matrix& pred, const Matrix& actual) {
  return detail::r2_generic(pred, actual, [](double x) { return x * x; });
}

inline double r2_absolute(const Matrix& pred, const Matrix& actual) {
  return detail::r2_generic(pred, actual, [](double x) { return std::abs(x); });
}

}  // namespace rfa
