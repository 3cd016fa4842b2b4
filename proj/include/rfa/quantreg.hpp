#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rfa/error.hpp"
#include "rfa/panel.hpp"

namespace rfa {

/// rho_tau(x) = (tau - 1{x <= 0}) x.
constexpr double check_loss(double x, double tau) noexcept {
  return x > 0.0 ? tau * x : (tau - 1.0) * x;
}

struct QuantRegProblem {
  Matrix design;               // n x k
  Vector response;             // n
  double tau = 0.5;
  std::vector<bool> include;   // empty means every row is included
};

enum class SolveStatus { Optimal, MaxIter, Degenerate };

constexpr const char* to_string(SolveStatus s) noexcept {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::MaxIter: return "MaxIter";
    case SolveStatus::Degenerate: return "Degenerate";
  }
  return "?";
}

struct QuantRegSolution {
  Vector beta;
  double objective = 0.0;
  int solver_iterations = 0;
  SolveStatus status = SolveStatus::Optimal;
};

struct QuantRegOptions {
  double tol = 1e-8;          // relative objective improvement, final smoothing stage
  int max_irls = 500;
  double eps_start = 1e-2;    // smoothing continuation, relative to the residual scale
  double eps_end = 1e-8;
  int stage_iterations = 20;  // IRLS sweeps per continuation stage
  int max_pivots = 0;         // vertex polish cap; 0 means 20 * n
};

/// Sum of check losses of y - X beta.
inline double check_objective(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                              const Vector& beta, double tau) {
  const Vector r = y - X * beta;
  double s = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) s += check_loss(r(i), tau);
  return s;
}

namespace detail {

inline double residual_objective(const Vector& r, double tau) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) s += check_loss(r(i), tau);
  return s;
}

/// Majorize-minimize sweeps on the check loss with smoothing continuation.
/// The quadratic majorizer of |r| at r0 is r^2 / (2 max(|r0|, eps)) + const,
/// giving (X'WX) beta = X'W y + (2 tau - 1) X'1.
template <class Solve>
int irls(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y, double tau,
         const QuantRegOptions& opt, Vector& beta, Solve&& solve) {
  const Eigen::Index n = X.rows();
  const Vector bias = (2.0 * tau - 1.0) * X.transpose() * Vector::Ones(n);
  Vector r = y - X * beta;
  double scale = r.cwiseAbs().mean();
  if (!(scale > 0.0)) return 0;
  double obj = residual_objective(r, tau);
  int total = 0;
  Vector w(n);
  for (double eps = opt.eps_start; eps >= opt.eps_end * 0.999 && total < opt.max_irls; eps *= 0.1) {
    const double floor = eps * scale;
    const bool last = eps * 0.1 < opt.eps_end * 0.999;
    const double stage_tol = last ? opt.tol : std::max(opt.tol, 1e-3);
    for (int it = 0; it < opt.stage_iterations && total < opt.max_irls; ++it, ++total) {
      for (Eigen::Index i = 0; i < n; ++i) w(i) = 1.0 / std::max(std::abs(r(i)), floor);
      const Matrix gram = X.transpose() * w.asDiagonal() * X;
      const Vector rhs = X.transpose() * w.cwiseProduct(y) + bias;
      Vector next = solve(gram, rhs);
      if (!next.allFinite()) return total;
      Vector r_next = y - X * next;
      const double obj_next = residual_objective(r_next, tau);
      const double improvement = obj - obj_next;
      beta = std::move(next);
      r = std::move(r_next);
      obj = obj_next;
      if (std::abs(improvement) <= stage_tol * (1.0 + std::abs(obj))) {
        ++total;
        break;
      }
    }
  }
  return total;
}

/// Pick k linearly independent rows of X, preferring small |r|.
inline std::optional<std::vector<Eigen::Index>> pick_basis(const Eigen::Ref<const Matrix>& X,
                                                           const Vector& r) {
  const Eigen::Index n = X.rows();
  const Eigen::Index k = X.cols();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return std::abs(r(a)) < std::abs(r(b)); });
  std::vector<Eigen::Index> basis;
  Matrix q(k, k);
  for (Eigen::Index idx : order) {
    if (static_cast<Eigen::Index>(basis.size()) == k) break;
    Vector v = X.row(idx).transpose();
    const double norm0 = v.norm();
    if (!(norm0 > 0.0)) continue;
    const auto m = static_cast<Eigen::Index>(basis.size());
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index j = 0; j < m; ++j) v -= q.col(j).dot(v) * q.col(j);
    const double norm = v.norm();
    if (norm <= 1e-9 * norm0) continue;
    q.col(m) = v / norm;
    basis.push_back(idx);
  }
  if (static_cast<Eigen::Index>(basis.size()) < k) return std::nullopt;
  return basis;
}

struct PolishResult {
  int pivots = 0;
  bool optimal = false;
};

/// Exact descent over the vertices of the check-loss polyhedron. A vertex is a
/// set B of k rows interpolated exactly; the edges leaving it free one basic
/// residual in either sign. Each pivot follows the steepest descending edge to
/// the weighted-median breakpoint, which swaps one row into the basis.
inline PolishResult polish(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                           double tau, int max_pivots, Vector& beta) {
  const Eigen::Index n = X.rows();
  const Eigen::Index k = X.cols();
  PolishResult out;
  Vector r = y - X * beta;
  auto picked = pick_basis(X, r);
  if (!picked) return out;
  std::vector<Eigen::Index> basis = std::move(*picked);
  std::vector<char> in_basis(static_cast<std::size_t>(n), 0);
  for (Eigen::Index b : basis) in_basis[static_cast<std::size_t>(b)] = 1;

  const double yscale = 1.0 + y.cwiseAbs().maxCoeff();
  const double zero_tol = 1e-12 * yscale;
  Matrix B(k, k);
  Vector yb(k);
  Matrix A(n, k);
  std::vector<std::pair<double, Eigen::Index>> breaks;
  breaks.reserve(static_cast<std::size_t>(n));

  auto solve_vertex = [&]() -> bool {
    for (Eigen::Index j = 0; j < k; ++j) {
      B.row(j) = X.row(basis[static_cast<std::size_t>(j)]);
      yb(j) = y(basis[static_cast<std::size_t>(j)]);
    }
    Eigen::PartialPivLU<Matrix> lu(B);
    const Matrix binv = lu.inverse();
    if (!binv.allFinite()) return false;
    beta = binv * yb;
    A.noalias() = X * binv;
    r = y - X * beta;
    for (Eigen::Index b : basis) r(b) = 0.0;
    return beta.allFinite();
  };
  if (!solve_vertex()) return out;
  double obj = residual_objective(r, tau);

  while (out.pivots < max_pivots) {
    // Slopes along the 2k edges: sigma = +1 pushes basic residual j negative.
    Eigen::Index best_j = -1;
    double best_sigma = 0.0;
    double best_g = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      double s = 0.0;       // sum over nonzero residuals of -psi(r_i) A_ij
      double zpos = 0.0;    // zero residuals, sigma = +1
      double zneg = 0.0;    // zero residuals, sigma = -1
      double anorm = 1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (in_basis[static_cast<std::size_t>(i)]) continue;
        const double a = A(i, j);
        anorm += std::abs(a);
        const double ri = r(i);
        if (std::abs(ri) > zero_tol) {
          s -= (ri > 0.0 ? tau : tau - 1.0) * a;
        } else {
          zpos += a > 0.0 ? (1.0 - tau) * a : -tau * a;
          zneg += -a > 0.0 ? -(1.0 - tau) * a : tau * a;
        }
      }
      const double g_pos = (1.0 - tau) + s + zpos;
      const double g_neg = tau - s + zneg;
      const double thresh = -1e-11 * anorm;
      if (g_pos < thresh && g_pos < best_g) {
        best_g = g_pos;
        best_j = j;
        best_sigma = 1.0;
      }
      if (g_neg < thresh && g_neg < best_g) {
        best_g = g_neg;
        best_j = j;
        best_sigma = -1.0;
      }
    }
    if (best_j < 0) {
      out.optimal = true;
      return out;
    }

    breaks.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (in_basis[static_cast<std::size_t>(i)]) continue;
      const double a = best_sigma * A(i, best_j);
      const double ri = r(i);
      if (std::abs(ri) > zero_tol && a != 0.0 && (ri > 0.0) == (a > 0.0))
        breaks.emplace_back(ri / a, i);
    }
    std::sort(breaks.begin(), breaks.end());
    double slope = best_g;
    Eigen::Index entering = -1;
    for (const auto& [t, i] : breaks) {
      slope += std::abs(A(i, best_j));
      if (slope >= 0.0) {
        entering = i;
        break;
      }
    }
    if (entering < 0) return out;  // unbounded direction; cannot happen at full rank

    const Eigen::Index leaving = basis[static_cast<std::size_t>(best_j)];
    const Vector beta_prev = beta;
    basis[static_cast<std::size_t>(best_j)] = entering;
    in_basis[static_cast<std::size_t>(leaving)] = 0;
    in_basis[static_cast<std::size_t>(entering)] = 1;
    ++out.pivots;
    if (!solve_vertex()) {
      beta = beta_prev;
      return out;
    }
    const double next = residual_objective(r, tau);
    if (next > obj + 1e-12 * (1.0 + obj)) {
      // Round-off produced an ascent; the previous vertex is as good as it gets.
      beta = beta_prev;
      out.optimal = true;
      return out;
    }
    obj = next;
  }
  return out;
}

inline QuantRegSolution solve_degenerate(const Eigen::Ref<const Matrix>& X,
                                         const Eigen::Ref<const Vector>& y, double tau,
                                         const QuantRegOptions& opt) {
  QuantRegSolution sol;
  sol.status = SolveStatus::Degenerate;
  sol.beta = Vector::Zero(X.cols());
  if (X.rows() == 0) return sol;
  sol.beta = Eigen::CompleteOrthogonalDecomposition<Matrix>(X).solve(y);
  sol.solver_iterations = irls(X, y, tau, opt, sol.beta, [](const Matrix& g, const Vector& rhs) {
    return Vector(Eigen::CompleteOrthogonalDecomposition<Matrix>(g).solve(rhs));
  });
  sol.objective = check_objective(X, y, sol.beta, tau);
  return sol;
}

}  // namespace detail

/// Check-loss regression on a compact design (all rows included). `warm` is
/// an optional starting coefficient vector.
inline QuantRegSolution quantile_regress_rows(const Eigen::Ref<const Matrix>& X,
                                              const Eigen::Ref<const Vector>& y, double tau,
                                              const QuantRegOptions& opt = {},
                                              const Vector* warm = nullptr) {
  if (!(tau > 0.0 && tau < 1.0)) throw Error(ErrorKind::InvalidParameter, "tau must lie in (0,1)");
  if (!(opt.tol > 0.0)) throw Error(ErrorKind::InvalidParameter, "tol must be positive");
  const Eigen::Index n = X.rows();
  const Eigen::Index k = X.cols();
  if (n < k) return detail::solve_degenerate(X, y, tau, opt);
  Eigen::ColPivHouseholderQR<Matrix> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) return detail::solve_degenerate(X, y, tau, opt);

  QuantRegSolution sol;
  if (warm && warm->size() == k && warm->allFinite()) {
    sol.beta = *warm;
  } else {
    sol.beta = qr.solve(y);
  }
  sol.solver_iterations = detail::irls(X, y, tau, opt, sol.beta, [](const Matrix& g, const Vector& rhs) {
    return Vector(g.ldlt().solve(rhs));
  });
  const int cap = opt.max_pivots > 0 ? opt.max_pivots : static_cast<int>(20 * n + 20);
  const auto pol = detail::polish(X, y, tau, cap, sol.beta);
  sol.solver_iterations += pol.pivots;
  sol.status = pol.optimal ? SolveStatus::Optimal : SolveStatus::MaxIter;
  sol.objective = check_objective(X, y, sol.beta, tau);
  return sol;
}

/// Check-loss regression honoring the include mask; excluded rows carry no loss.
inline QuantRegSolution quantile_regress(const QuantRegProblem& prob, double tol = 1e-8,
                                         const Vector* warm = nullptr) {
  const Eigen::Index n = prob.design.rows();
  if (prob.response.size() != n) throw Error(ErrorKind::InvalidParameter, "design/response size mismatch");
  if (!prob.include.empty() && static_cast<Eigen::Index>(prob.include.size()) != n)
    throw Error(ErrorKind::InvalidParameter, "include mask size mismatch");
  QuantRegOptions opt;
  opt.tol = tol;
  if (prob.include.empty()) return quantile_regress_rows(prob.design, prob.response, prob.tau, opt, warm);
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < n; ++i)
    if (prob.include[static_cast<std::size_t>(i)]) rows.push_back(i);
  const auto m = static_cast<Eigen::Index>(rows.size());
  Matrix X(m, prob.design.cols());
  Vector y(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    X.row(j) = prob.design.row(rows[static_cast<std::size_t>(j)]);
    y(j) = prob.response(rows[static_cast<std::size_t>(j)]);
  }
  return quantile_regress_rows(X, y, prob.tau, opt, warm);
}

/// Smallest value v whose empirical CDF reaches tau.
inline double weighted_quantile(std::span<const double> values, double tau) {
  if (values.empty()) throw Error(ErrorKind::EmptyInput, "quantile of an empty sample");
  std::vector<double> v(values.begin(), values.end());
  const auto n = v.size();
  std::size_t k = static_cast<std::size_t>(std::ceil(tau * static_cast<double>(n)));
  k = std::clamp<std::size_t>(k, 1, n);
  if (k > 1 && static_cast<double>(k - 1) / static_cast<double>(n) >= tau) --k;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k - 1), v.end());
  return v[k - 1];
}

}  // namespace rfa
