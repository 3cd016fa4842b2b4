#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "rfa/io.hpp"

namespace {

using rfa::Matrix;

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

TEST(FormatDouble, RoundTripsBitExactly) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::uint64_t> bits;
  int checked = 0;
  while (checked < 20000) {
    const std::uint64_t b = bits(rng);
    double v;
    std::memcpy(&v, &b, sizeof v);
    if (!std::isfinite(v)) continue;
    EXPECT_TRUE(same_bits(rfa::parse_double(rfa::format_double(v)), v)) << rfa::format_double(v);
    ++checked;
  }
  EXPECT_EQ(rfa::format_double(0.1), "0.1");
  EXPECT_EQ(rfa::format_double(-2.0), "-2");
  EXPECT_THROW((void)rfa::parse_double("1.5x"), rfa::Error);
  EXPECT_DOUBLE_EQ(rfa::parse_double(" +2.5\r"), 2.5);
}

TEST(PanelCsv, RoundTripWithMissingCells) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  Matrix v(6, 9);
  for (Eigen::Index j = 0; j < v.size(); ++j) v.data()[j] = std::exp(3.0 * n(rng)) * n(rng);
  const rfa::PanelData panel = rfa::PanelData(v).without(1, 2).without(5, 8);
  std::stringstream s;
  rfa::write_panel_csv(s, panel, {"a", "b", "c", "d", "e", "f"});
  const auto back = rfa::read_panel_csv(s);
  EXPECT_EQ(back.ids, (std::vector<std::string>{"a", "b", "c", "d", "e", "f"}));
  EXPECT_EQ(back.panel.mask(), panel.mask());
  for (Eigen::Index i = 0; i < 6; ++i)
    for (Eigen::Index t = 0; t < 9; ++t)
      if (panel.observed(i, t)) EXPECT_TRUE(same_bits(back.panel.values()(i, t), v(i, t)));
}

TEST(PanelCsv, ParsesCommentsAndRejectsRaggedRows) {
  std::istringstream ok("# meta\nid,t1,t2\nx,1,\ny,,2.5\n");
  const auto p = rfa::read_panel_csv(ok);
  EXPECT_EQ(p.panel.p(), 2);
  EXPECT_FALSE(p.panel.observed(0, 1));
  EXPECT_EQ(p.panel.values()(1, 1), 2.5);
  std::istringstream ragged("id,t1,t2\nx,1\n");
  EXPECT_THROW((void)rfa::read_panel_csv(ragged), rfa::Error);
  std::istringstream empty("id,t1\n");
  EXPECT_THROW((void)rfa::read_panel_csv(empty), rfa::Error);
  EXPECT_THROW((void)rfa::read_panel_csv(std::string("/nonexistent/panel.csv")), rfa::Error);
}

TEST(MatrixCsv, RoundTrip) {
  const Matrix m{{1.0 / 3.0, -1e-300}, {6.02e23, 0.0}};
  std::stringstream s;
  rfa::write_matrix_csv(s, m);
  EXPECT_EQ(rfa::read_matrix_csv(s), m);
  std::istringstream ragged("1,2\n3\n");
  EXPECT_THROW((void)rfa::read_matrix_csv(ragged), rfa::Error);
}

TEST(FitJson, RoundTrip) {
  rfa::FactorFit fit;
  fit.loadings = Matrix{{0.1, 0.7}, {1.0 / 7.0, -3.25}};
  fit.scores = Matrix{{1e-17, 2.0, 3.0}, {4.0, 5.5, -6.0}};
  fit.residuals = Matrix::Constant(2, 3, -0.5);
  fit.loss = 1.0 / 3.0;
  fit.iterations = 12;
  fit.tau = 0.75;
  fit.converged = true;
  const auto j = rfa::Json::parse(rfa::fit_to_json(fit).dump());
  const auto back = rfa::fit_from_json(j);
  EXPECT_EQ(back.loadings, fit.loadings);
  EXPECT_EQ(back.scores, fit.scores);
  EXPECT_TRUE(same_bits(back.loss, fit.loss));
  EXPECT_EQ(back.iterations, 12);
  EXPECT_EQ(back.tau, 0.75);
  EXPECT_TRUE(back.converged);
  EXPECT_EQ(j["residual_summary"]["max_abs"], 0.5);
  EXPECT_THROW((void)rfa::fit_from_json(rfa::Json::parse(R"({"loadings": [[1]]})")), rfa::Error);
}

}  // namespace
