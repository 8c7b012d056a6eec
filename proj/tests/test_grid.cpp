#include <cmath>

#include <gtest/gtest.h>

#include "benchmarks.hpp"

using namespace densctl;

TEST(Grid, SizeSpacingAndRowMajorOrder) {
  const Grid g({Axis{-1, 1, 5}, Axis{0, 3, 4}});
  EXPECT_EQ(g.dim(), 2);
  EXPECT_EQ(g.size(), 20u);
  EXPECT_DOUBLE_EQ(g.spacing(0), 0.5);
  EXPECT_DOUBLE_EQ(g.spacing(1), 1.0);
  EXPECT_DOUBLE_EQ(g.cell_volume(), 0.5);
  // last axis fastest
  EXPECT_EQ(g.stride(1), 1u);
  EXPECT_EQ(g.stride(0), 4u);
  EXPECT_EQ(g.index(5, 0), 1);
  EXPECT_EQ(g.index(5, 1), 1);
  EXPECT_DOUBLE_EQ(g.coordinate(5, 0), -0.5);
  EXPECT_DOUBLE_EQ(g.coordinate(5, 1), 1.0);
  EXPECT_EQ(g.coordinate(19, 0), 1.0);
  EXPECT_EQ(g.coordinate(19, 1), 3.0);
}

TEST(Grid, RejectsBadAxes) {
  EXPECT_THROW(Grid({Axis{0, 1, 2}}), InputError);
  EXPECT_THROW(Grid({Axis{1, 1, 5}}), InputError);
  EXPECT_THROW(Grid({Axis{1, 0, 5}}), InputError);
  EXPECT_THROW(Grid(std::vector<Axis>{}), InputError);
  EXPECT_THROW(Grid({Axis{0, 1, 3}, Axis{0, 1, 3}, Axis{0, 1, 3}, Axis{0, 1, 3}}), InputError);
}

TEST(Grid, ShellsAndInterior) {
  const Grid g({Axis{-6, 6, 13}});
  EXPECT_EQ(g.shell(0), 0);
  EXPECT_EQ(g.shell(12), 0);
  EXPECT_EQ(g.shell(6), 6);
  EXPECT_EQ(g.shell_count(), 7);
  EXPECT_TRUE(g.in_interior(6, 0.5));
  EXPECT_TRUE(g.in_interior(3, 0.5));   // x = -3
  EXPECT_FALSE(g.in_interior(2, 0.5));  // x = -4
}

TEST(ScalarField, RejectsNonFiniteValuesAndWrongSize) {
  const Grid g({Axis{0, 1, 3}});
  EXPECT_THROW(ScalarField(g, Eigen::Vector3d(0, std::nan(""), 1)), DomainError);
  EXPECT_THROW(ScalarField(g, Eigen::Vector2d(0, 1)), ShapeError);
  const ScalarField one = ScalarField::constant(g, 1.0);
  EXPECT_DOUBLE_EQ(one.integral(), 1.5);  // 3 cells of width 0.5
}

TEST(TensorField, SpdReportFindsWorstNode) {
  const ProblemSpec s = bench::spec_1d("x1^2", "x1^2", -1, 1, 5);
  const TensorField t = diffusion_field(s);
  const SpdReport r = t.spd_report();
  EXPECT_EQ(r.worst_node, 2u);
  EXPECT_EQ(r.min_eigenvalue, 0.0);
  EXPECT_THROW(t.require_spd(), SpdError);
  EXPECT_NO_THROW(diffusion_field(bench::ou(11)).require_spd());
}

TEST(TensorField, AsymmetryIsRejected) {
  const Grid g({Axis{0, 1, 3}, Axis{0, 1, 3}});
  SmallMatrix m(2, 2);
  m << 2, 0.5, 0.4, 2;
  const TensorField t(g, std::vector<SmallMatrix>(g.size(), m));
  EXPECT_THROW(t.require_spd(), SpdError);
}

// Second-order differences: the error ratio between h and h/2 approaches 4,
// including at the one-sided boundary rows.
TEST(FiniteDifference, SecondOrderEverywhere) {
  double prev_d1 = 0.0, prev_d2 = 0.0;
  for (int n : {41, 81, 161}) {
    const Grid g({Axis{-1, 2, n}});
    const ScalarField f = bench::field("sin(2*x1) + x1^3", g);
    const Eigen::VectorXd d1 = fd::derivative(g, f.values(), 0);
    const Eigen::VectorXd d2 = fd::second_derivative(g, f.values(), 0);
    double e1 = 0.0, e2 = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = g.coordinate(i, 0);
      e1 = std::max(e1, std::abs(d1[static_cast<Eigen::Index>(i)] - (2 * std::cos(2 * x) + 3 * x * x)));
      e2 = std::max(e2, std::abs(d2[static_cast<Eigen::Index>(i)] - (-4 * std::sin(2 * x) + 6 * x)));
    }
    if (prev_d1 > 0.0) {
      EXPECT_GT(prev_d1 / e1, 3.5);
      EXPECT_GT(prev_d2 / e2, 3.5);
    }
    prev_d1 = e1;
    prev_d2 = e2;
  }
}

TEST(FiniteDifference, MixedDerivativeAndDivergence) {
  const Grid g({Axis{-1, 1, 81}, Axis{-1, 1, 81}});
  const ScalarField f = bench::field("x1^2 * x2^3", g);
  const Eigen::VectorXd m = fd::mixed_derivative(g, f.values(), 0, 1);
  double err = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.coordinate(i, 0), y = g.coordinate(i, 1);
    err = std::max(err, std::abs(m[static_cast<Eigen::Index>(i)] - 6 * x * y * y));
  }
  EXPECT_LT(err, 1e-2);

  // div of Sigma = [[x1^2, 0], [0, x2]] is (2 x1, 1), exact for quadratics.
  std::vector<SmallMatrix> vals;
  for (std::size_t i = 0; i < g.size(); ++i) {
    SmallMatrix s(2, 2);
    s << std::pow(g.coordinate(i, 0), 2), 0, 0, g.coordinate(i, 1);
    vals.push_back(s);
  }
  const VectorField div = fd::divergence(TensorField(g, vals));
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_NEAR(div(i, 0), 2 * g.coordinate(i, 0), 1e-10);
    EXPECT_NEAR(div(i, 1), 1.0, 1e-10);
  }
}
