#pragma once

#include <cmath>

#include "rfa/error.hpp"
#include "rfa/panel.hpp"

namespace rfa {

inline void require_complete(const PanelData& Y, const char* who) {
  if (!Y.complete())
    throw Error(ErrorKind::MissingDataUnsupported, std::string(who) + " needs a panel without missing cells");
}

/// Eigenvalues of YY'/(pT), descending, length min(p, T).
inline Vector pca_eigenvalues(const PanelData& Y) {
  require_complete(Y, "pca");
  const Matrix& v = Y.values();
  const double scale = static_cast<double>(Y.p()) * static_cast<double>(Y.T());
  const Matrix gram = Y.p() <= Y.T() ? Matrix(v * v.transpose() / scale) : Matrix(v.transpose() * v / scale);
  Vector d = detail::sorted_eigen(gram).first;
  return d.cwiseMax(0.0);
}

/// Least-squares rank-r factor fit (principal components).
inline FactorFit fit_pca(const PanelData& Y, Eigen::Index r) {
  require_complete(Y, "pca");
  const Eigen::Index p = Y.p();
  const Eigen::Index T = Y.T();
  if (r < 1 || r > std::min(p, T)) throw Error(ErrorKind::InvalidParameter, "r must lie in [1, min(p, T)]");
  const Matrix& v = Y.values();
  const double pd = static_cast<double>(p);
  const double Td = static_cast<double>(T);
  Matrix L;
  Matrix F;
  if (p <= T) {
    const auto eig = detail::sorted_eigen(v * v.transpose() / (pd * Td));
    L = std::sqrt(pd) * eig.second.leftCols(r);
    F = L.transpose() * v / pd;
  } else {
    const auto eig = detail::sorted_eigen(v.transpose() * v / (pd * Td));
    F = std::sqrt(Td) * eig.second.leftCols(r).transpose();
    L = v * F.transpose() / Td;
  }
  auto [Ln, Fn] = normalize_canonical(L, F);
  FactorFit fit;
  fit.loadings = std::move(Ln);
  fit.scores = std::move(Fn);
  fit.residuals = v - fit.loadings * fit.scores;
  fit.loss = fit.residuals.squaredNorm();
  fit.iterations = 1;
  fit.tau = 0.5;
  fit.converged = true;
  return fit;
}

}  // namespace rfa
