#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "rfa/baselines.hpp"
#include "rfa/error.hpp"
#include "rfa/factor_number.hpp"
#include "rfa/metrics.hpp"
#include "rfa/panel.hpp"
#include "rfa/quantreg.hpp"
#include "rfa/random.hpp"
#include "rfa/rip.hpp"
#include "rfa/simlab.hpp"

namespace rfa {

/// Zeroes off-diagonal entries with |s_ij| < thr; the diagonal is kept.
inline Matrix hard_threshold(const Matrix& S, double thr) {
  if (S.rows() != S.cols()) throw Error(ErrorKind::InvalidParameter, "hard_threshold needs a square matrix");
  if (!(thr >= 0.0)) throw Error(ErrorKind::InvalidParameter, "threshold must be nonnegative");
  Matrix out = S;
  for (Eigen::Index j = 0; j < S.cols(); ++j)
    for (Eigen::Index i = 0; i < S.rows(); ++i)
      if (i != j && std::abs(S(i, j)) < thr) out(i, j) = 0.0;
  return out;
}

/// Adaptive: thr = c * median |off-diagonal|, c = 1, 1.5, 1.5^2, ... until the
/// estimate is well conditioned. Fixed: a given absolute threshold.
struct ThresholdRule {
  enum class Kind { Adaptive, Fixed } kind = Kind::Adaptive;
  double value = 0.0;
  int max_steps = 40;
};

struct SigmaEstimate {
  Matrix sigma;
  double threshold = 0.0;
  double ridge = 0.0;  // epsilon added to the diagonal by the final repair, 0 if none
};

namespace detail {

inline double min_eigenvalue(const Matrix& S) {
  return Eigen::SelfAdjointEigenSolver<Matrix>(S, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

inline double median_abs_offdiag(const Matrix& S) {
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(S.size()));
  for (Eigen::Index j = 0; j < S.cols(); ++j)
    for (Eigen::Index i = 0; i < j; ++i) v.push_back(std::abs(S(i, j)));
  if (v.empty()) return 0.0;
  return sample_quantile(std::move(v), 0.5);
}

}  // namespace detail

/// Common-component Gram / T plus hard-thresholded residual Gram / T, repaired
/// so that the smallest eigenvalue is at least 1e-8 * trace / p.
inline SigmaEstimate estimate_sigma(const FactorFit& fit, Eigen::Index window_T, const ThresholdRule& rule = {}) {
  if (window_T != fit.scores.cols()) throw Error(ErrorKind::InvalidParameter, "window_T must equal the fit's T");
  const double Td = static_cast<double>(window_T);
  const Matrix C = fit.common();
  const Matrix common = C * C.transpose() / Td;
  const Matrix resid = fit.residuals * fit.residuals.transpose() / Td;
  const double p = static_cast<double>(C.rows());

  auto floor_of = [&](const Matrix& S) { return 1e-8 * S.trace() / p; };
  SigmaEstimate est;
  if (rule.kind == ThresholdRule::Kind::Fixed) {
    est.threshold = rule.value;
    est.sigma = common + hard_threshold(resid, rule.value);
  } else {
    const double base = detail::median_abs_offdiag(resid);
    double c = 1.0;
    for (int step = 0; step < rule.max_steps; ++step, c *= 1.5) {
      est.threshold = c * base;
      est.sigma = common + hard_threshold(resid, est.threshold);
      if (detail::min_eigenvalue(est.sigma) >= floor_of(est.sigma)) break;
    }
  }
  est.sigma = 0.5 * (est.sigma + est.sigma.transpose());
  const double trace = est.sigma.trace();
  if (!(trace > 0.0) || !std::isfinite(trace)) throw Error(ErrorKind::NotRepairable, "covariance estimate has no positive trace");
  const double lmin = detail::min_eigenvalue(est.sigma);
  const double target = floor_of(est.sigma);
  if (lmin < target) {
    est.ridge = 2.0 * target - lmin;
    est.sigma.diagonal().array() += est.ridge;
    if (detail::min_eigenvalue(est.sigma) < floor_of(est.sigma))
      throw Error(ErrorKind::NotRepairable, "ridge repair failed");
  }
  return est;
}

/// Sigma^{-1} 1 / (1' Sigma^{-1} 1).
inline Vector min_var_weights(const Matrix& Sigma) {
  if (Sigma.rows() != Sigma.cols() || Sigma.rows() == 0)
    throw Error(ErrorKind::InvalidParameter, "Sigma must be a nonempty square matrix");
  const Eigen::LLT<Matrix> llt(Sigma);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::Singular, "Sigma is not positive definite");
  const Vector x = llt.solve(Vector::Ones(Sigma.rows()));
  const double s = x.sum();
  if (!(s > 0.0) || !x.allFinite()) throw Error(ErrorKind::Singular, "Sigma is numerically singular");
  return x / s;
}

enum class RankRule { Fixed, Rer, Er };

struct BacktestConfig {
  int window = 52;
  int refit_every = 1;
  Method method = Method::Rip;
  RankRule rank_rule = RankRule::Fixed;
  int r = 3;
  int r_max = 8;
  double tau = 0.5;
  int n_starts = 5;
  std::uint64_t seed = 0;
  int threads = 1;
  ThresholdRule threshold;

  void validate(Eigen::Index T) const {
    if (refit_every < 1) throw Error(ErrorKind::InvalidParameter, "refit_every must be at least 1");
    if (r < 1) throw Error(ErrorKind::InvalidParameter, "r must be at least 1");
    if (window < r + 1) throw Error(ErrorKind::InvalidParameter, "window must exceed r");
    if (T <= window) throw Error(ErrorKind::InvalidParameter, "need more periods than the window");
  }
};

struct BacktestResult {
  std::vector<Eigen::Index> periods;  // out-of-sample column index of each step
  std::vector<Vector> weights;
  std::vector<double> portfolio_returns;
  std::vector<double> net_value;  // starts at 1, one entry per step after that
  std::vector<int> r_hat;
  double r2_square = std::numeric_limits<double>::quiet_NaN();
  double r2_absolute = std::numeric_limits<double>::quiet_NaN();
  int degenerate_periods = 0;
  bool degenerate = false;
};

namespace detail {

inline FactorFit fit_window(const PanelData& Y, const BacktestConfig& cfg, int r, std::uint64_t refit) {
  if (cfg.method == Method::Pca) return fit_pca(Y, r);
  RipConfig rc;
  rc.r = r;
  rc.tau = cfg.tau;
  rc.n_starts = cfg.n_starts;
  rc.seed = stream_seed(cfg.seed, "init", refit);
  rc.threads = cfg.threads;
  return fit_rip(Y, rc);
}

inline int choose_rank(const PanelData& Y, const BacktestConfig& cfg, std::uint64_t refit) {
  if (cfg.rank_rule == RankRule::Fixed) return cfg.r;
  SelectionConfig sc;
  sc.r_max = cfg.r_max;
  sc.tau = cfg.tau;
  if (cfg.rank_rule == RankRule::Er) return select_r_er(Y, sc).r;
  RipConfig rc;
  rc.n_starts = cfg.n_starts;
  rc.seed = stream_seed(cfg.seed, "init", refit);
  rc.threads = cfg.threads;
  return select_r_rer(Y, sc, rc).r;
}

/// Cross-sectional fit of one period on the loadings: least squares for PCA,
/// least absolute deviations for RIP.
inline Vector cross_section(const Matrix& L, const Vector& y, Method method) {
  if (method == Method::Pca) return L.colPivHouseholderQr().solve(y);
  QuantRegOptions opt;
  return quantile_regress_rows(L, y, 0.5, opt).beta;
}

}  // namespace detail

/// Rolling-window minimum-variance backtest. The window ending before period t
/// is demeaned by row, fitted, and turned into weights applied to column t.
inline BacktestResult backtest(const PanelData& returns, const BacktestConfig& cfg) {
  require_complete(returns, "backtest");
  cfg.validate(returns.T());
  const Eigen::Index p = returns.p();
  const Eigen::Index T = returns.T();
  const Eigen::Index W = cfg.window;
  const Matrix& x = returns.values();

  BacktestResult res;
  res.net_value.push_back(1.0);
  double ss_res = 0.0, ss_tot = 0.0, sa_res = 0.0, sa_tot = 0.0;
  Vector w = Vector::Constant(p, 1.0 / static_cast<double>(p));
  std::optional<Matrix> L;
  Vector mu = Vector::Zero(p);
  int r_cur = cfg.r;
  bool have_fit = false;

  for (Eigen::Index t = W; t < T; ++t) {
    const Eigen::Index step = t - W;
    if (step % cfg.refit_every == 0) {
      const auto refit = static_cast<std::uint64_t>(step / cfg.refit_every);
      const Matrix block = x.middleCols(t - W, W);
      mu = block.rowwise().mean();
      const PanelData centered(Matrix(block.colwise() - mu));
      try {
        r_cur = detail::choose_rank(centered, cfg, refit);
        const FactorFit fit = detail::fit_window(centered, cfg, r_cur, refit);
        w = min_var_weights(estimate_sigma(fit, W, cfg.threshold).sigma);
        L = fit.loadings;
        have_fit = true;
      } catch (const Error& e) {
        if (!is_numerical(e.kind())) throw;
        w = Vector::Constant(p, 1.0 / static_cast<double>(p));
        L.reset();
        have_fit = false;
        ++res.degenerate_periods;
      }
    }
    const Vector xt = x.col(t);
    const double g = w.dot(xt);
    res.periods.push_back(t);
    res.weights.push_back(w);
    res.portfolio_returns.push_back(g);
    res.net_value.push_back(res.net_value.back() * std::exp(g));
    res.r_hat.push_back(have_fit ? r_cur : 0);
    if (have_fit) {
      const Vector y = xt - mu;
      const Vector f = detail::cross_section(*L, y, cfg.method);
      const Vector resid = y - *L * f;
      ss_res += resid.squaredNorm();
      ss_tot += y.squaredNorm();
      sa_res += resid.cwiseAbs().sum();
      sa_tot += y.cwiseAbs().sum();
    }
  }
  if (ss_tot > 0.0) res.r2_square = 1.0 - ss_res / ss_tot;
  if (sa_tot > 0.0) res.r2_absolute = 1.0 - sa_res / sa_tot;
  res.degenerate = res.degenerate_periods > 0 || !(ss_tot > 0.0);
  return res;
}

struct ContaminationCurve {
  std::vector<double> proportions;
  std::vector<double> mean_distance;
  std::vector<std::vector<double>> distances;  // [proportion][replication]
};

/// For each proportion q and replication k, multiplies round(q p T) randomly
/// chosen demeaned returns by `factor`, refits and records the loading-space
/// distance to the clean fit. Replication k uses one cell permutation for all
/// proportions, so contaminated sets are nested.
inline ContaminationCurve contamination_sensitivity(const PanelData& returns, const std::vector<double>& proportions,
                                                    int n_reps, Method method, int r, std::uint64_t seed,
                                                    double factor = 5.0, int n_starts = 5, int threads = 1) {
  require_complete(returns, "contamination_sensitivity");
  if (n_reps < 1) throw Error(ErrorKind::InvalidParameter, "n_reps must be at least 1");
  for (double q : proportions)
    if (!(q >= 0.0 && q < 1.0)) throw Error(ErrorKind::InvalidParameter, "proportions must lie in [0,1)");
  const Matrix& x = returns.values();
  const Matrix centered = x.colwise() - x.rowwise().mean();
  BacktestConfig bc;
  bc.method = method;
  bc.n_starts = n_starts;
  bc.seed = seed;
  bc.threads = threads;
  const Matrix clean = detail::fit_window(PanelData(centered), bc, r, 0).loadings;

  const auto cells = static_cast<std::size_t>(centered.size());
  ContaminationCurve curve;
  curve.proportions = proportions;
  curve.distances.assign(proportions.size(), std::vector<double>(static_cast<std::size_t>(n_reps)));
  for (int k = 0; k < n_reps; ++k) {
    Rng rng = make_rng(seed, "contamination", static_cast<std::uint64_t>(k));
    std::vector<std::size_t> order(cells);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i + 1 < cells; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, cells - 1);
      std::swap(order[i], order[pick(rng)]);
    }
    for (std::size_t j = 0; j < proportions.size(); ++j) {
      const auto count = static_cast<std::size_t>(std::llround(proportions[j] * static_cast<double>(cells)));
      if (count == 0) {
        curve.distances[j][static_cast<std::size_t>(k)] = 0.0;
        continue;
      }
      Matrix dirty = centered;
      for (std::size_t c = 0; c < count; ++c) dirty.data()[order[c]] *= factor;
      const Matrix L = detail::fit_window(PanelData(dirty), bc, r, 0).loadings;
      curve.distances[j][static_cast<std::size_t>(k)] = space_distance(L, clean);
    }
  }
  for (const auto& d : curve.distances) curve.mean_distance.push_back(std::accumulate(d.begin(), d.end(), 0.0) / n_reps);
  return curve;
}

}  // namespace rfa
