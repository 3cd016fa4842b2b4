#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rfa/error.hpp"
#include "rfa/panel.hpp"
#include "rfa/parallel.hpp"
#include "rfa/quantreg.hpp"
#include "rfa/random.hpp"

namespace rfa {

struct RipConfig {
  int r = 1;
  double tau = 0.5;
  int max_iter = 100;
  double conv_tol = 1e-5;
  int n_starts = 5;
  std::uint64_t seed = 0;
  double inner_tol = 1e-8;
  int threads = 1;

  void validate(Eigen::Index p, Eigen::Index T) const {
    if (r < 1) throw Error(ErrorKind::InvalidParameter, "r must be at least 1");
    if (r > std::min(p, T)) throw Error(ErrorKind::InvalidParameter, "r exceeds min(p, T)");
    if (!(tau > 0.0 && tau < 1.0)) throw Error(ErrorKind::InvalidParameter, "tau must lie in (0,1)");
    if (max_iter < 1) throw Error(ErrorKind::InvalidParameter, "max_iter must be positive");
    if (!(conv_tol > 0.0)) throw Error(ErrorKind::InvalidParameter, "conv_tol must be positive");
    if (n_starts < 1) throw Error(ErrorKind::InvalidParameter, "n_starts must be at least 1");
    if (!(inner_tol > 0.0)) throw Error(ErrorKind::InvalidParameter, "inner_tol must be positive");
  }
};

/// Per-chain record of the alternating iterations.
struct RipTrace {
  std::vector<double> objective;  // after each full (F-step, L-step) iteration
  std::vector<double> delta;      // relative common-component change, from iteration 2 on
  double rate_reference = 0.0;    // log p / sqrt(T) + 1 / sqrt(p)
  bool failed = false;
  std::string failure;
};

struct RipResult {
  FactorFit fit;
  std::vector<RipTrace> chains;
  int best_chain = -1;
};

/// Sum of check losses over observed cells of Y - C.
inline double panel_check_loss(const PanelData& Y, const Matrix& C, double tau) {
  double s = 0.0;
  for (Eigen::Index t = 0; t < Y.T(); ++t)
    for (Eigen::Index i = 0; i < Y.p(); ++i)
      if (Y.observed(i, t)) s += check_loss(Y.values()(i, t) - C(i, t), tau);
  return s;
}

/// Gaussian starting loadings rotated so that L'L/p is diagonal (descending),
/// rescaled if needed so that no row norm exceeds 10.
inline Matrix init_loadings(Eigen::Index p, Eigen::Index r, Rng& rng) {
  if (r < 1 || r > p) throw Error(ErrorKind::InvalidParameter, "init_loadings needs 1 <= r <= p");
  std::normal_distribution<double> norm;
  Matrix L(p, r);
  for (Eigen::Index j = 0; j < r; ++j)
    for (Eigen::Index i = 0; i < p; ++i) L(i, j) = norm(rng);
  auto [d, u] = detail::sorted_eigen(L.transpose() * L / static_cast<double>(p));
  L = L * u;
  detail::fix_signs(L, nullptr);
  const double max_row = L.rowwise().norm().maxCoeff();
  if (max_row > 10.0) L *= 10.0 / max_row;
  return L;
}

namespace detail {

inline void require_observations(const Mask& mask, Eigen::Index r, bool by_column) {
  const Eigen::Index outer = by_column ? mask.cols() : mask.rows();
  for (Eigen::Index a = 0; a < outer; ++a) {
    const Eigen::Index count = by_column ? mask.col(a).count() : mask.row(a).count();
    if (count < r)
      throw Error(ErrorKind::InsufficientData,
                  std::string(by_column ? "column " : "row ") + std::to_string(a) +
                      " has fewer than r observations");
  }
}

/// Solves `count` independent check-loss regressions that share a design X
/// (rows x k). Problem a uses response column a of `responses` (rows x count)
/// restricted to the rows where `observed(row, a)` holds.
template <class Observed>
Matrix solve_many(const Matrix& X, const Matrix& responses, const Observed& observed,
                  bool complete, double tau, double tol, int threads, const Matrix* warm) {
  const Eigen::Index k = X.cols();
  const Eigen::Index n = X.rows();
  const Eigen::Index count = responses.cols();
  Matrix out(k, count);
  std::vector<SolveStatus> status(static_cast<std::size_t>(count), SolveStatus::Optimal);
  QuantRegOptions opt;
  opt.tol = tol;
  parallel_for(static_cast<std::size_t>(count), threads, [&](std::size_t idx) {
    const auto a = static_cast<Eigen::Index>(idx);
    std::optional<Vector> start;
    if (warm) start = warm->col(a);
    QuantRegSolution sol;
    if (complete) {
      sol = quantile_regress_rows(X, responses.col(a), tau, opt, start ? &*start : nullptr);
    } else {
      std::vector<Eigen::Index> rows;
      rows.reserve(static_cast<std::size_t>(n));
      for (Eigen::Index i = 0; i < n; ++i)
        if (observed(i, a)) rows.push_back(i);
      const auto m = static_cast<Eigen::Index>(rows.size());
      Matrix Xs(m, k);
      Vector ys(m);
      for (Eigen::Index j = 0; j < m; ++j) {
        Xs.row(j) = X.row(rows[static_cast<std::size_t>(j)]);
        ys(j) = responses(rows[static_cast<std::size_t>(j)], a);
      }
      sol = quantile_regress_rows(Xs, ys, tau, opt, start ? &*start : nullptr);
    }
    out.col(a) = sol.beta;
    status[idx] = sol.status;
  });
  for (std::size_t idx = 0; idx < status.size(); ++idx)
    if (status[idx] == SolveStatus::Degenerate)
      throw Error(ErrorKind::Degenerate, "regression " + std::to_string(idx) + " is degenerate");
  return out;
}

}  // namespace detail

/// Cross-sectional step: for every t, regress the observed y_.t on the rows
/// of L. Returns the raw r x T minimizer (no renormalization).
inline Matrix f_step(const PanelData& Y, const Matrix& L, double tau, double tol = 1e-8,
                     int threads = 1, const Matrix* warm = nullptr) {
  if (L.rows() != Y.p()) throw Error(ErrorKind::InvalidParameter, "loadings do not match panel rows");
  detail::require_observations(Y.mask(), L.cols(), true);
  const Mask& mask = Y.mask();
  return detail::solve_many(
      L, Y.values(), [&](Eigen::Index i, Eigen::Index t) { return mask(i, t); }, Y.complete(), tau, tol,
      threads, warm);
}

/// Serial step: for every i, regress the observed y_i. on the columns of F.
/// Returns the raw p x r minimizer (no renormalization).
inline Matrix l_step(const PanelData& Y, const Matrix& F, double tau, double tol = 1e-8,
                     int threads = 1, const Matrix* warm = nullptr) {
  if (F.cols() != Y.T()) throw Error(ErrorKind::InvalidParameter, "scores do not match panel columns");
  detail::require_observations(Y.mask(), F.rows(), false);
  const Mask& mask = Y.mask();
  const Matrix Ft = F.transpose();
  const Matrix Yt = Y.values().transpose();
  std::optional<Matrix> warm_t;
  if (warm) warm_t = warm->transpose();
  Matrix est = detail::solve_many(
      Ft, Yt, [&](Eigen::Index t, Eigen::Index i) { return mask(i, t); }, Y.complete(), tau, tol, threads,
      warm_t ? &*warm_t : nullptr);
  return est.transpose();
}

namespace detail {

struct ChainOutcome {
  Matrix L;
  Matrix F;
  double objective = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

inline ChainOutcome run_chain(const PanelData& Y, const RipConfig& cfg, int chain, RipTrace& trace) {
  Rng rng = make_rng(cfg.seed, "init", static_cast<std::uint64_t>(chain));
  ChainOutcome out;
  Matrix L = init_loadings(Y.p(), cfg.r, rng);
  Matrix F;
  Matrix C_prev;
  for (int k = 1; k <= cfg.max_iter; ++k) {
    F = f_step(Y, L, cfg.tau, cfg.inner_tol, cfg.threads, k > 1 ? &F : nullptr);
    std::tie(L, F) = normalize_canonical(L, F);
    L = l_step(Y, F, cfg.tau, cfg.inner_tol, cfg.threads, &L);
    std::tie(L, F) = normalize_canonical(L, F);
    Matrix C = L * F;
    const double obj = panel_check_loss(Y, C, cfg.tau);
    trace.objective.push_back(obj);
    out.iterations = k;
    if (k > 1) {
      const double denom = C_prev.cwiseAbs().sum();
      const double delta = denom > 0.0 ? (C - C_prev).cwiseAbs().sum() / denom : 0.0;
      trace.delta.push_back(delta);
      if (delta < cfg.conv_tol) {
        out.converged = true;
        C_prev = std::move(C);
        break;
      }
    }
    C_prev = std::move(C);
  }
  out.L = std::move(L);
  out.F = std::move(F);
  out.objective = trace.objective.back();
  return out;
}

}  // namespace detail

/// Alternating check-loss factor estimation with multi-start; keeps the chain
/// with the lowest final objective (ties go to the lower chain index).
inline RipResult fit_rip_traced(const PanelData& Y, const RipConfig& cfg) {
  cfg.validate(Y.p(), Y.T());
  detail::require_observations(Y.mask(), cfg.r, true);
  detail::require_observations(Y.mask(), cfg.r, false);
  const double p = static_cast<double>(Y.p());
  const double T = static_cast<double>(Y.T());

  RipResult res;
  res.chains.resize(static_cast<std::size_t>(cfg.n_starts));
  std::optional<detail::ChainOutcome> best;
  for (int c = 0; c < cfg.n_starts; ++c) {
    RipTrace& trace = res.chains[static_cast<std::size_t>(c)];
    trace.rate_reference = std::log(p) / std::sqrt(T) + 1.0 / std::sqrt(p);
    try {
      auto outcome = detail::run_chain(Y, cfg, c, trace);
      if (!best || outcome.objective < best->objective) {
        best = std::move(outcome);
        res.best_chain = c;
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Degenerate && e.kind() != ErrorKind::RankDeficient) throw;
      trace.failed = true;
      trace.failure = e.what();
    }
  }
  if (!best) throw Error(ErrorKind::AllChainsFailed, "every RIP chain hit a degenerate step");

  FactorFit& fit = res.fit;
  fit.loadings = std::move(best->L);
  fit.scores = std::move(best->F);
  fit.tau = cfg.tau;
  fit.iterations = best->iterations;
  fit.converged = best->converged;
  const Matrix C = fit.loadings * fit.scores;
  fit.residuals = Matrix::Zero(Y.p(), Y.T());
  for (Eigen::Index t = 0; t < Y.T(); ++t)
    for (Eigen::Index i = 0; i < Y.p(); ++i)
      if (Y.observed(i, t)) fit.residuals(i, t) = Y.values()(i, t) - C(i, t);
  fit.loss = panel_check_loss(Y, C, cfg.tau);
  return res;
}

inline FactorFit fit_rip(const PanelData& Y, const RipConfig& cfg) { return fit_rip_traced(Y, cfg).fit; }

}  // namespace rfa
