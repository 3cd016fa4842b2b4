#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rfa/error.hpp"

namespace rfa {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// p x T observations; rows are variables, columns are time points.
/// mask(i, t) is true when y_it is observed. Unobserved cells hold NaN.
class PanelData {
 public:
  PanelData() = default;

  explicit PanelData(Matrix values) : values_(std::move(values)) {
    mask_ = values_.unaryExpr([](double v) { return std::isfinite(v); });
    validate();
  }

  PanelData(Matrix values, Mask mask) : values_(std::move(values)), mask_(std::move(mask)) {
    if (mask_.rows() != values_.rows() || mask_.cols() != values_.cols())
      throw Error(ErrorKind::InvalidParameter, "mask shape does not match values");
    for (Eigen::Index t = 0; t < values_.cols(); ++t)
      for (Eigen::Index i = 0; i < values_.rows(); ++i)
        if (!mask_(i, t)) values_(i, t) = std::numeric_limits<double>::quiet_NaN();
    validate();
  }

  Eigen::Index p() const noexcept { return values_.rows(); }
  Eigen::Index T() const noexcept { return values_.cols(); }
  const Matrix& values() const noexcept { return values_; }
  const Mask& mask() const noexcept { return mask_; }
  bool observed(Eigen::Index i, Eigen::Index t) const { return mask_(i, t); }
  bool complete() const { return mask_.all(); }
  Eigen::Index observed_count() const { return mask_.count(); }

  /// Copy with the (i, t) cell marked missing.
  PanelData without(Eigen::Index i, Eigen::Index t) const {
    Mask m = mask_;
    m(i, t) = false;
    return PanelData(values_, std::move(m));
  }

 private:
  void validate() const {
    if (values_.rows() < 1 || values_.cols() < 1)
      throw Error(ErrorKind::InvalidParameter, "panel must have p >= 1 and T >= 1");
    for (Eigen::Index t = 0; t < values_.cols(); ++t) {
      bool any = false;
      for (Eigen::Index i = 0; i < values_.rows(); ++i) {
        if (!mask_(i, t)) continue;
        any = true;
        if (!std::isfinite(values_(i, t)))
          throw Error(ErrorKind::InvalidParameter, "observed panel entry is not finite");
      }
      if (!any) throw Error(ErrorKind::InvalidParameter, "panel column without observations");
    }
  }

  Matrix values_;
  Mask mask_;
};

/// Output of a factor estimator. Residuals are zero at unobserved cells.
struct FactorFit {
  Matrix loadings;   // p x r
  Matrix scores;     // r x T
  Matrix residuals;  // p x T
  double loss = 0.0;
  int iterations = 0;
  double tau = 0.5;
  bool converged = false;

  Eigen::Index r() const noexcept { return loadings.cols(); }
  Matrix common() const { return loadings * scores; }
};

struct RotationMatrix {
  Matrix w;
};

namespace detail {

/// Symmetric eigen-decomposition, eigenvalues descending. Equal eigenvalues
/// keep the solver's column order.
inline std::pair<Vector, Matrix> sorted_eigen(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  if (es.info() != Eigen::Success)
    throw Error(ErrorKind::Singular, "symmetric eigen-decomposition failed");
  const Eigen::Index n = sym.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return es.eigenvalues()(a) > es.eigenvalues()(b);
  });
  Vector values(n);
  Matrix vectors(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    values(j) = es.eigenvalues()(order[static_cast<std::size_t>(j)]);
    vectors.col(j) = es.eigenvectors().col(order[static_cast<std::size_t>(j)]);
  }
  return {values, vectors};
}

/// Flip column signs of `l` (and the matching rows of `f`) so that the
/// largest-magnitude entry of every column of `l` is positive.
inline void fix_signs(Matrix& l, Matrix* f) {
  for (Eigen::Index j = 0; j < l.cols(); ++j) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) {
      const double a = std::abs(l(i, j));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    if (l(arg, j) < 0.0) {
      l.col(j) = -l.col(j);
      if (f) f->row(j) = -f->row(j);
    }
  }
}

}  // namespace detail

/// Rotate (L, F) to the identified form: F F'/T = I_r and L'L/p diagonal with
/// descending entries, keeping the product L F unchanged.
inline std::pair<Matrix, Matrix> normalize_canonical(const Matrix& L, const Matrix& F) {
  const Eigen::Index r = L.cols();
  if (F.rows() != r) throw Error(ErrorKind::InvalidParameter, "L and F inner dimensions differ");
  if (!L.allFinite() || !F.allFinite())
    throw Error(ErrorKind::InvalidParameter, "non-finite factor matrices");
  const double T = static_cast<double>(F.cols());
  const double p = static_cast<double>(L.rows());

  const Matrix S = F * F.transpose() / T;
  auto [s_val, s_vec] = detail::sorted_eigen(S);
  // Singular values of F relative to the largest are sqrt of eigenvalue ratios.
  if (!(s_val(0) > 0.0) || s_val(r - 1) <= 1e-24 * s_val(0))
    throw Error(ErrorKind::RankDeficient, "score matrix has numerical rank below r");
  const Vector sqrt_s = s_val.cwiseSqrt();
  const Matrix s_half = s_vec * sqrt_s.asDiagonal() * s_vec.transpose();
  const Matrix s_inv_half = s_vec * sqrt_s.cwiseInverse().asDiagonal() * s_vec.transpose();

  const Matrix f_bar = s_inv_half * F;
  const Matrix l_bar = L * s_half;
  auto [d, u] = detail::sorted_eigen(l_bar.transpose() * l_bar / p);
  if (!(d(0) > 0.0) || d(r - 1) <= 1e-24 * d(0))
    throw Error(ErrorKind::RankDeficient, "loading matrix has numerical rank below r");

  Matrix l_star = l_bar * u;
  Matrix f_star = u.transpose() * f_bar;
  detail::fix_signs(l_star, &f_star);
  return {std::move(l_star), std::move(f_star)};
}

/// Rotation identifying estimated loadings with the truth:
/// {sum h_i l_i l_i'}^{-1} sum h_i l_i l0_i'.
inline RotationMatrix compute_w0(const Matrix& L_hat, const Matrix& L_true, const Vector& h0) {
  const Eigen::Index p = L_hat.rows();
  if (L_true.rows() != p || L_true.cols() != L_hat.cols() || h0.size() != p)
    throw Error(ErrorKind::InvalidParameter, "compute_w0 shape mismatch");
  if ((h0.array() <= 0.0).any() || !h0.allFinite())
    throw Error(ErrorKind::InvalidParameter, "densities at zero must be positive");
  const Matrix gram = L_hat.transpose() * h0.asDiagonal() * L_hat;
  const Matrix cross = L_hat.transpose() * h0.asDiagonal() * L_true;
  Eigen::JacobiSVD<Matrix> svd(gram);
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) <= 0.0 || sv(0) / sv(sv.size() - 1) > 1e12)
    throw Error(ErrorKind::Singular, "weighted loading Gram matrix is ill-conditioned");
  return RotationMatrix{gram.ldlt().solve(cross)};
}

/// Orthonormal basis of the column space (thin Q of a Householder QR).
inline Matrix orthonormal_basis(const Matrix& A) {
  Eigen::HouseholderQR<Matrix> qr(A);
  return qr.householderQ() * Matrix::Identity(A.rows(), A.cols());
}

/// Distance between column spaces of two column-orthonormal matrices:
/// (1 - tr(Q1 Q1' Q2 Q2') / max(q1, q2))^{1/2}.
inline double subspace_distance(const Matrix& Q1, const Matrix& Q2) {
  if (Q1.rows() != Q2.rows()) throw Error(ErrorKind::InvalidParameter, "row counts differ");
  for (const Matrix* q : {&Q1, &Q2}) {
    const Matrix g = q->transpose() * *q;
    const double dev = (g - Matrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
    if (!(dev <= 1e-6)) throw Error(ErrorKind::NotOrthonormal, "input columns are not orthonormal");
  }
  const double q = static_cast<double>(std::max(Q1.cols(), Q2.cols()));
  // tr(Q1 Q1' Q2 Q2') = ||Q1' Q2||_F^2
  const double tr = (Q1.transpose() * Q2).squaredNorm();
  return std::sqrt(std::clamp(1.0 - tr / q, 0.0, 1.0));
}

/// subspace_distance after orthonormalizing both arguments.
inline double space_distance(const Matrix& A, const Matrix& B) {
  return subspace_distance(orthonormal_basis(A), orthonormal_basis(B));
}

}  // namespace rfa
