#pragma once

// Test-only exact solver for the check-loss regression written as the
// split-variable linear program
//   min  tau 1'u + (1 - tau) 1'v
//   s.t. X b+ - X b- + u - v = y,   b+, b-, u, v >= 0
// solved with a dense tableau simplex under Bland's rule. Independent of the
// library's IRLS/vertex solver on purpose.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace rfa::testing {

struct LpResult {
  Eigen::VectorXd beta;
  double objective = 0.0;
  int pivots = 0;
};

inline LpResult lp_check_loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double tau) {
  const int n = static_cast<int>(X.rows());
  const int k = static_cast<int>(X.cols());
  const int nv = 2 * k + 2 * n;  // b+, b-, u, v
  // Tableau rows 0..n-1 constraints, row n objective (reduced costs).
  Eigen::MatrixXd tab = Eigen::MatrixXd::Zero(n + 1, nv + 1);
  std::vector<int> basis(static_cast<std::size_t>(n));
  Eigen::VectorXd cost = Eigen::VectorXd::Zero(nv);
  for (int i = 0; i < n; ++i) {
    cost(2 * k + i) = tau;
    cost(2 * k + n + i) = 1.0 - tau;
  }
  for (int i = 0; i < n; ++i) {
    const double sgn = y(i) >= 0.0 ? 1.0 : -1.0;
    for (int j = 0; j < k; ++j) {
      tab(i, j) = sgn * X(i, j);
      tab(i, k + j) = -sgn * X(i, j);
    }
    tab(i, 2 * k + i) = sgn;
    tab(i, 2 * k + n + i) = -sgn;
    tab(i, nv) = sgn * y(i);
    basis[static_cast<std::size_t>(i)] = sgn > 0 ? 2 * k + i : 2 * k + n + i;
  }
  // Reduced costs c_j - c_B B^{-1} a_j.
  for (int j = 0; j <= nv; ++j) {
    double z = 0.0;
    for (int i = 0; i < n; ++i) z += cost(basis[static_cast<std::size_t>(i)]) * tab(i, j);
    tab(n, j) = (j < nv ? cost(j) : 0.0) - z;
  }

  LpResult res;
  const double eps = 1e-11;
  for (int iter = 0; iter < 100000; ++iter) {
    int enter = -1;
    for (int j = 0; j < nv; ++j)
      if (tab(n, j) < -eps) {
        enter = j;
        break;
      }
    if (enter < 0) break;
    int leave = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (tab(i, enter) > eps) {
        const double ratio = tab(i, nv) / tab(i, enter);
        if (ratio < best - 1e-14 ||
            (std::abs(ratio - best) <= 1e-14 && leave >= 0 &&
             basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
          best = ratio;
          leave = i;
        }
      }
    }
    if (leave < 0) throw std::runtime_error("lp oracle: unbounded");
    const double piv = tab(leave, enter);
    tab.row(leave) /= piv;
    for (int i = 0; i <= n; ++i)
      if (i != leave && tab(i, enter) != 0.0) tab.row(i) -= tab(i, enter) * tab.row(leave);
    basis[static_cast<std::size_t>(leave)] = enter;
    ++res.pivots;
  }
  Eigen::VectorXd x = Eigen::VectorXd::Zero(nv);
  for (int i = 0; i < n; ++i) x(basis[static_cast<std::size_t>(i)]) = tab(i, nv);
  res.beta = x.head(k) - x.segment(k, k);
  res.objective = cost.dot(x);
  return res;
}

/// Best objective over all k-row interpolating fits (exhaustive; tiny n only).
inline double brute_force_basic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double tau) {
  const int n = static_cast<int>(X.rows());
  const int k = static_cast<int>(X.cols());
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> idx(static_cast<std::size_t>(k));
  auto eval = [&](const Eigen::VectorXd& b) {
    const Eigen::VectorXd r = y - X * b;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += r(i) > 0 ? tau * r(i) : (tau - 1.0) * r(i);
    return s;
  };
  auto rec = [&](auto&& self, int start, int depth) -> void {
    if (depth == k) {
      Eigen::MatrixXd B(k, k);
      Eigen::VectorXd yb(k);
      for (int j = 0; j < k; ++j) {
        B.row(j) = X.row(idx[static_cast<std::size_t>(j)]);
        yb(j) = y(idx[static_cast<std::size_t>(j)]);
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
      if (lu.rank() < k) return;
      best = std::min(best, eval(lu.solve(yb)));
      return;
    }
    for (int i = start; i < n; ++i) {
      idx[static_cast<std::size_t>(depth)] = i;
      self(self, i + 1, depth + 1);
    }
  };
  rec(rec, 0, 0);
  return best;
}

}  // namespace rfa::testing
