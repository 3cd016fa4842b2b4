#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "rfa/distributions.hpp"

namespace {

using rfa::Matrix;
using rfa::Vector;

double sample_variance(const Vector& x) {
  const double m = x.mean();
  return (x.array() - m).square().sum() / static_cast<double>(x.size() - 1);
}

double median(Vector x) {
  std::sort(x.data(), x.data() + x.size());
  const auto n = x.size();
  return n % 2 ? x(n / 2) : 0.5 * (x(n / 2 - 1) + x(n / 2));
}

double kurtosis(const Vector& x) {
  const double m = x.mean();
  const double m2 = (x.array() - m).square().mean();
  const double m4 = (x.array() - m).pow(4).mean();
  return m4 / (m2 * m2);
}

TEST(Stable, GaussianReduction) {
  auto rng = rfa::make_rng(1, "test");
  const Vector x = rfa::sample_stable(2.0, 0.0, 1.0 / std::sqrt(2.0), 0.0, 100000, rng);
  const double v = sample_variance(x);
  EXPECT_GE(v, 0.97);
  EXPECT_LE(v, 1.03);
}

TEST(Stable, CauchyMedian) {
  auto rng = rfa::make_rng(2, "test");
  const Vector x = rfa::sample_stable(1.0, 0.0, 1.0, 0.0, 100000, rng);
  EXPECT_LE(std::abs(median(x)), 0.02);
}

TEST(Stable, CdfMatchesReferenceValues) {
  // Frozen from an independent numerical evaluation (Zolotarev integral form).
  const double xs[] = {-1.5, -0.8, 0.0, 0.8, 1.5, 3.0};
  const double cdf[] = {0.15942880452499852, 0.2867373137520912, 0.5,
                        0.7132626862479088,  0.8405711954750015, 0.948402196440815};
  const double pdf[] = {0.1361336280733782,  0.22846956899635645, 0.28735275145216443,
                        0.22846956899635645, 0.1361336280733782,  0.03150942361632494};
  for (int k = 0; k < 6; ++k) {
    EXPECT_NEAR(rfa::stable_cdf(xs[k], 1.5), cdf[k], 1e-7) << xs[k];
    EXPECT_NEAR(rfa::symmetric_stable_pdf(xs[k], 1.5), pdf[k], 1e-7) << xs[k];
  }
  EXPECT_NEAR(rfa::symmetric_stable_quantile(0.75, 1.5), 0.9689331817135829, 1e-7);
  EXPECT_NEAR(rfa::stable_cdf(0.5, 1.5, 0.5), 0.7120635555156598, 1e-6);
  EXPECT_NEAR(rfa::stable_cdf(0.5, 1.0, 0.5), 0.5678851993617333, 1e-6);
  EXPECT_NEAR(rfa::stable_cdf(1.0, 1.0, 0.5, 2.0, 1.0), 0.3710912205496476, 1e-6);
  EXPECT_NEAR(rfa::stable_cdf(3.0, 1.5, 0.5, 2.0, 1.0), 0.7967806891350713, 1e-6);
}

TEST(Stable, ClosedFormsAtSpecialIndices) {
  EXPECT_NEAR(rfa::stable_cdf(1.0, 1.0), 0.75, 1e-9);
  EXPECT_NEAR(rfa::symmetric_stable_pdf0(1.0, 2.0), 1.0 / (2.0 * M_PI), 1e-15);
  EXPECT_NEAR(rfa::symmetric_stable_pdf0(2.0, 1.0), 1.0 / std::sqrt(4.0 * M_PI), 1e-15);
  EXPECT_NEAR(rfa::symmetric_stable_quantile(0.75, 1.0, 3.0), 3.0, 1e-12);
  EXPECT_NEAR(rfa::symmetric_stable_quantile(0.25, 1.5), -0.9689331817135829, 1e-7);
}

TEST(Stable, EmpiricalCdfMatchesInversion) {
  auto rng = rfa::make_rng(3, "test");
  const Vector x = rfa::sample_stable(1.5, 0.0, 1.0, 0.0, 100000, rng);
  for (double q : {0.25, 0.5, 0.75}) {
    const double point = rfa::symmetric_stable_quantile(q, 1.5);
    const double ecdf = (x.array() <= point).cast<double>().mean();
    EXPECT_NEAR(ecdf, rfa::stable_cdf(point, 1.5), 0.01) << q;
  }
}

TEST(Stable, SkewedEmpiricalCdf) {
  auto rng = rfa::make_rng(4, "test");
  for (double alpha : {1.0, 1.5}) {
    const Vector x = rfa::sample_stable(alpha, 0.5, 2.0, 1.0, 100000, rng);
    for (double point : {-1.0, 1.0, 3.0}) {
      const double ecdf = (x.array() <= point).cast<double>().mean();
      EXPECT_NEAR(ecdf, rfa::stable_cdf(point, alpha, 0.5, 2.0, 1.0), 0.01) << alpha << " " << point;
    }
  }
}

TEST(Stable, RejectsBadParameters) {
  auto rng = rfa::make_rng(0, "test");
  EXPECT_THROW((void)rfa::sample_stable(2.5, 0.0, 1.0, 0.0, 3, rng), rfa::Error);
  EXPECT_THROW((void)rfa::sample_stable(1.5, 1.5, 1.0, 0.0, 3, rng), rfa::Error);
  EXPECT_THROW((void)rfa::sample_stable(1.5, 0.0, 0.0, 0.0, 3, rng), rfa::Error);
}

TEST(MultivariateT, GaussianLimit) {
  auto rng = rfa::make_rng(5, "test");
  const Matrix x = rfa::sample_mvt(1e6, 4, 50000, rng);
  for (Eigen::Index i = 0; i < 4; ++i) {
    const double v = sample_variance(x.row(i).transpose());
    EXPECT_NEAR(v, 1.0, 0.03);
  }
}

TEST(MultivariateT, HeavyMarginalKurtosis) {
  int exceed = 0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    auto rng = rfa::make_rng(static_cast<std::uint64_t>(s), "kurtosis");
    const Matrix x = rfa::sample_mvt(3.0, 1, 100000, rng);
    if (kurtosis(x.row(0).transpose()) > 9.0) ++exceed;
  }
  EXPECT_GE(exceed, 19);
}

TEST(MultivariateT, ComponentsShareMixing) {
  auto rng = rfa::make_rng(6, "test");
  const Matrix x = rfa::sample_mvt(3.0, 2, 50000, rng);
  const Vector a = x.row(0).cwiseAbs().transpose();
  const Vector b = x.row(1).cwiseAbs().transpose();
  const double cov = ((a.array() - a.mean()) * (b.array() - b.mean())).mean();
  const double corr = cov / std::sqrt(sample_variance(a) * sample_variance(b));
  EXPECT_GT(corr, 0.1);
  // Independent columns carry no such dependence: compare against a shifted pairing.
  const Vector bs = Vector(b.tail(b.size() - 1));
  const Vector as = Vector(a.head(a.size() - 1));
  const double cov0 = ((as.array() - as.mean()) * (bs.array() - bs.mean())).mean();
  EXPECT_LT(std::abs(cov0 / std::sqrt(sample_variance(as) * sample_variance(bs))), 0.05);
}

TEST(StudentAndNormal, Helpers) {
  EXPECT_NEAR(rfa::normal_quantile(0.75), 0.6744897501960817, 1e-14);
  EXPECT_NEAR(rfa::student_quantile(0.75, 3.0), 0.7648923284043453, 1e-12);
  EXPECT_NEAR(rfa::student_pdf(0.0, 1.0), 1.0 / M_PI, 1e-15);
}

}  // namespace
