#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "rfa/rip.hpp"
#include "support/lp_oracle.hpp"

namespace {

using rfa::Matrix;
using rfa::Vector;

Matrix gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n;
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

struct Truth {
  Matrix L;
  Matrix F;
};

Truth canonical_truth(std::mt19937_64& rng, Eigen::Index p, Eigen::Index T, Eigen::Index r) {
  auto [L, F] = rfa::normalize_canonical(gaussian(rng, p, r), gaussian(rng, r, T));
  return {L, F};
}

rfa::RipConfig config(int r, std::uint64_t seed = 1) {
  rfa::RipConfig cfg;
  cfg.r = r;
  cfg.seed = seed;
  cfg.n_starts = 2;
  cfg.conv_tol = 1e-9;
  cfg.max_iter = 200;
  return cfg;
}

TEST(InitLoadings, Postconditions) {
  auto rng = rfa::make_rng(5, "init");
  const Matrix l1 = rfa::init_loadings(4, 1, rng);
  EXPECT_EQ(l1.rows(), 4);
  EXPECT_GT(l1.squaredNorm() / 4.0, 0.0);

  const Matrix l3 = rfa::init_loadings(10, 3, rng);
  const Matrix g = l3.transpose() * l3 / 10.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      if (a != b) EXPECT_LT(std::abs(g(a, b)), 1e-8);
  EXPECT_LE(l3.rowwise().norm().maxCoeff(), 10.0);

  auto r1 = rfa::make_rng(9, "init", 2);
  auto r2 = rfa::make_rng(9, "init", 2);
  EXPECT_EQ(rfa::init_loadings(30, 4, r1), rfa::init_loadings(30, 4, r2));
}

TEST(InitLoadings, RowNormsBounded) {
  auto rng = rfa::make_rng(1, "init");
  const Matrix l = rfa::init_loadings(500, 20, rng);
  EXPECT_LE(l.rowwise().norm().maxCoeff(), 10.0 + 1e-12);
}

TEST(FStep, MedianOfColumn) {
  Matrix v(3, 1);
  v << 1, 2, 3;
  const Matrix F = rfa::f_step(rfa::PanelData(v), Matrix::Ones(3, 1), 0.5);
  EXPECT_NEAR(F(0, 0), 2.0, 1e-12);
}

TEST(LStep, MedianOfRow) {
  Matrix v(1, 3);
  v << 1, 2, 3;
  const Matrix L = rfa::l_step(rfa::PanelData(v), Matrix::Ones(1, 3), 0.5);
  EXPECT_NEAR(L(0, 0), 2.0, 1e-12);
}

TEST(FStep, NoiselessFixedPoint) {
  std::mt19937_64 rng(2);
  const auto truth = canonical_truth(rng, 25, 18, 3);
  const rfa::PanelData Y(Matrix(truth.L * truth.F));
  const Matrix F = rfa::f_step(Y, truth.L, 0.5);
  EXPECT_LT((F - truth.F).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT(rfa::panel_check_loss(Y, truth.L * F, 0.5), 1e-9);
  const Matrix L = rfa::l_step(Y, truth.F, 0.5);
  EXPECT_LT((L - truth.L).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(FStep, MatchesPerColumnLpOracle) {
  std::mt19937_64 rng(20);
  std::student_t_distribution<double> noise(2.0);
  const Eigen::Index p = 20, T = 15, r = 2;
  const auto truth = canonical_truth(rng, p, T, r);
  Matrix v = truth.L * truth.F;
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index i = 0; i < p; ++i) v(i, t) += noise(rng);
  const rfa::PanelData Y(v);
  for (double tau : {0.5, 0.3}) {
    const Matrix F = rfa::f_step(Y, truth.L, tau);
    for (Eigen::Index t = 0; t < T; ++t) {
      const auto lp = rfa::testing::lp_check_loss(truth.L, v.col(t), tau);
      const double got = rfa::check_objective(truth.L, v.col(t), F.col(t), tau);
      EXPECT_NEAR(got, lp.objective, 1e-6 * (1.0 + lp.objective)) << "t=" << t;
    }
    const Matrix L = rfa::l_step(Y, truth.F, tau);
    const Matrix Ft = truth.F.transpose();
    for (Eigen::Index i = 0; i < p; ++i) {
      const Vector yi = v.row(i).transpose();
      const auto lp = rfa::testing::lp_check_loss(Ft, yi, tau);
      const double got = rfa::check_objective(Ft, yi, L.row(i).transpose(), tau);
      EXPECT_NEAR(got, lp.objective, 1e-6 * (1.0 + lp.objective)) << "i=" << i;
    }
  }
}

TEST(FStep, InsufficientObservations) {
  Matrix v = Matrix::Ones(4, 3);
  v(0, 1) = NAN;
  v(1, 1) = NAN;
  v(2, 1) = NAN;
  const rfa::PanelData Y(v);
  try {
    (void)rfa::f_step(Y, Matrix::Ones(4, 2) + Matrix::Identity(4, 2), 0.5);
    FAIL() << "expected InsufficientData";
  } catch (const rfa::Error& e) {
    EXPECT_EQ(e.kind(), rfa::ErrorKind::InsufficientData);
  }
}

TEST(FitRip, NoiselessExactRecovery) {
  std::mt19937_64 rng(31);
  const auto truth = canonical_truth(rng, 40, 30, 3);
  const rfa::PanelData Y(Matrix(truth.L * truth.F));
  const auto fit = rfa::fit_rip(Y, config(3));
  EXPECT_LT(fit.residuals.cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT(rfa::space_distance(fit.loadings, truth.L), 1e-6);
}

TEST(FitRip, RecoveryInsensitiveToStartingSeed) {
  std::mt19937_64 rng(32);
  const auto truth = canonical_truth(rng, 30, 25, 2);
  const rfa::PanelData Y(Matrix(truth.L * truth.F));
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    const auto fit = rfa::fit_rip(Y, config(2, seed));
    EXPECT_LT(rfa::space_distance(fit.loadings, truth.L), 1e-6) << "seed " << seed;
  }
}

TEST(FitRip, MissingEntryStillRecovered) {
  std::mt19937_64 rng(33);
  const auto truth = canonical_truth(rng, 30, 25, 2);
  Matrix v = truth.L * truth.F;
  v(3, 7) = NAN;
  v(10, 0) = NAN;
  const rfa::PanelData Y(v);
  const auto fit = rfa::fit_rip(Y, config(2));
  EXPECT_LT(fit.loss, 1e-6);
  EXPECT_EQ(fit.residuals(3, 7), 0.0);
  EXPECT_LT(rfa::space_distance(fit.loadings, truth.L), 1e-6);
}

TEST(FitRip, ObjectiveMonotoneAndFitCanonical) {
  std::mt19937_64 rng(34);
  std::cauchy_distribution<double> noise;
  const auto truth = canonical_truth(rng, 50, 40, 3);
  Matrix v = truth.L * truth.F;
  for (Eigen::Index t = 0; t < v.cols(); ++t)
    for (Eigen::Index i = 0; i < v.rows(); ++i) v(i, t) += noise(rng);
  rfa::RipConfig cfg = config(3);
  cfg.n_starts = 3;
  cfg.conv_tol = 1e-6;
  const auto res = rfa::fit_rip_traced(rfa::PanelData(v), cfg);
  ASSERT_EQ(res.chains.size(), 3u);
  for (const auto& tr : res.chains) {
    ASSERT_FALSE(tr.failed);
    for (std::size_t k = 1; k < tr.objective.size(); ++k)
      EXPECT_LE(tr.objective[k], tr.objective[k - 1] + 1e-8 * (1.0 + tr.objective[k - 1]));
    EXPECT_EQ(tr.delta.size() + 1, tr.objective.size());
    EXPECT_NEAR(tr.rate_reference, std::log(50.0) / std::sqrt(40.0) + 1.0 / std::sqrt(50.0), 1e-15);
  }
  double lowest = res.chains[0].objective.back();
  for (const auto& tr : res.chains) lowest = std::min(lowest, tr.objective.back());
  EXPECT_EQ(res.fit.loss, lowest);

  const auto& fit = res.fit;
  const Matrix ff = fit.scores * fit.scores.transpose() / 40.0;
  EXPECT_LT((ff - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-10);
  const Matrix ll = fit.loadings.transpose() * fit.loadings / 50.0;
  EXPECT_LT(std::abs(ll(0, 1)) + std::abs(ll(0, 2)) + std::abs(ll(1, 2)), 1e-10);
  EXPECT_LT((fit.residuals - (v - fit.common())).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FitRip, RenormalizationPreservesObjective) {
  std::mt19937_64 rng(35);
  std::student_t_distribution<double> noise(3.0);
  const auto truth = canonical_truth(rng, 30, 20, 2);
  Matrix v = truth.L * truth.F;
  for (Eigen::Index t = 0; t < v.cols(); ++t)
    for (Eigen::Index i = 0; i < v.rows(); ++i) v(i, t) += noise(rng);
  const rfa::PanelData Y(v);
  auto init = rfa::make_rng(3, "init");
  Matrix L = rfa::init_loadings(30, 2, init);
  for (int k = 0; k < 5; ++k) {
    Matrix F = rfa::f_step(Y, L, 0.5);
    const double raw = rfa::panel_check_loss(Y, L * F, 0.5);
    std::tie(L, F) = rfa::normalize_canonical(L, F);
    EXPECT_NEAR(rfa::panel_check_loss(Y, L * F, 0.5), raw, 1e-10 * (1.0 + raw));
    L = rfa::l_step(Y, F, 0.5);
    const double raw2 = rfa::panel_check_loss(Y, L * F, 0.5);
    std::tie(L, F) = rfa::normalize_canonical(L, F);
    EXPECT_NEAR(rfa::panel_check_loss(Y, L * F, 0.5), raw2, 1e-10 * (1.0 + raw2));
  }
}

TEST(FitRip, IdenticalAcrossThreadCounts) {
  std::mt19937_64 rng(36);
  std::cauchy_distribution<double> noise;
  const auto truth = canonical_truth(rng, 40, 30, 2);
  Matrix v = truth.L * truth.F;
  for (Eigen::Index t = 0; t < v.cols(); ++t)
    for (Eigen::Index i = 0; i < v.rows(); ++i) v(i, t) += noise(rng);
  const rfa::PanelData Y(v);
  rfa::RipConfig cfg = config(2);
  cfg.conv_tol = 1e-5;
  const auto a = rfa::fit_rip(Y, cfg);
  cfg.threads = 4;
  const auto b = rfa::fit_rip(Y, cfg);
  EXPECT_EQ(a.loadings, b.loadings);
  EXPECT_EQ(a.scores, b.scores);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(FitRip, RejectsBadConfig) {
  const rfa::PanelData Y(Matrix::Ones(3, 3));
  rfa::RipConfig cfg;
  cfg.r = 4;
  EXPECT_THROW((void)rfa::fit_rip(Y, cfg), rfa::Error);
  cfg.r = 1;
  cfg.n_starts = 0;
  EXPECT_THROW((void)rfa::fit_rip(Y, cfg), rfa::Error);
  cfg.n_starts = 1;
  cfg.tau = 0.0;
  EXPECT_THROW((void)rfa::fit_rip(Y, cfg), rfa::Error);
}

TEST(FitRip, AllChainsFailOnRankOneData) {
  // Rank-one data cannot support two factors: renormalization hits a rank-deficient pair.
  const Matrix v = Vector::LinSpaced(6, 1.0, 6.0) * Vector::LinSpaced(5, 1.0, 5.0).transpose();
  rfa::RipConfig cfg = config(2);
  try {
    (void)rfa::fit_rip(rfa::PanelData(v), cfg);
    FAIL() << "expected AllChainsFailed";
  } catch (const rfa::Error& e) {
    EXPECT_EQ(e.kind(), rfa::ErrorKind::AllChainsFailed);
  }
}

}  // namespace
