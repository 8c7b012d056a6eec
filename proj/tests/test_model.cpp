#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "benchmarks.hpp"

using namespace densctl;

namespace {

const Finding* find(const ValidationReport& r, const std::string& check, Severity s) {
  for (const Finding& f : r.findings) {
    if (f.check == check && f.severity == s) return &f;
  }
  return nullptr;
}

}  // namespace

TEST(EvalScalarField, DirectEvaluation) {
  const ProblemSpec s = bench::ou();
  const ScalarField phi = potential_field(s);
  EXPECT_EQ(phi[0], 36.0);
  EXPECT_EQ(phi[400], 36.0);
  EXPECT_EQ(phi[200], 0.0);

  const ScalarField zero = bench::field("0", s.grid);
  EXPECT_EQ(zero.values().cwiseAbs().maxCoeff(), 0.0);

  const Grid g({Axis{-1, 1, 3}});
  EXPECT_EQ(bench::field("1 + x1^2", g)[2], 2.0);
}

TEST(EvalScalarField, DomainErrorsNameTheNode) {
  const Grid g({Axis{-1, 1, 3}});
  try {
    bench::field("log(x1)", g);
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("node 0"), std::string::npos);
  }
  EXPECT_THROW(bench::field("x2", g), InputError);
}

TEST(EvalScalarField, Deterministic) {
  const ProblemSpec s = bench::double_well_2d();
  const ScalarField a = potential_field(s);
  const ScalarField b = potential_field(s);
  EXPECT_EQ(std::memcmp(a.values().data(), b.values().data(), sizeof(double) * a.size()), 0);
}

TEST(Drift, ConstantSigmaQuadraticPotential) {
  const ProblemSpec s = bench::ou();
  const VectorField b = drift_from_potential(diffusion_field(s), potential_field(s));
  for (std::size_t i = 0; i < s.grid.size(); ++i) EXPECT_NEAR(b(i, 0), -2.0 * s.grid.coordinate(i, 0), 1e-12);
}

TEST(Drift, MultiplicativeNoiseGivesCubicDrift) {
  const ProblemSpec s = bench::multiplicative();
  const VectorField b = drift_from_potential(diffusion_field(s), potential_field(s));
  const double err = bench::interior_max(s.grid, [&](std::size_t i) {
    const double x = s.grid.coordinate(i, 0);
    return b(i, 0) + x * x * x;
  }, 1.0);
  EXPECT_LT(err, 1e-10);  // quadratic data: central differences are exact
}

TEST(Drift, FlatPotentialLeavesHalfDivergence) {
  ProblemSpec s = bench::double_well_2d();
  s.phi = parse_expression("3");
  const TensorField sigma = diffusion_field(s);
  const VectorField b = drift_from_potential(sigma, potential_field(s));
  const VectorField div = fd::divergence(sigma);
  EXPECT_LT((b.values() - 0.5 * div.values()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Drift, InvariantUnderConstantShiftOfPhi) {
  const ProblemSpec s = bench::multiplicative(101);
  const TensorField sigma = diffusion_field(s);
  const ScalarField phi = potential_field(s);
  const ScalarField shifted(s.grid, phi.values().array() + 0.75);
  const VectorField a = drift_from_potential(sigma, phi);
  const VectorField b = drift_from_potential(sigma, shifted);
  EXPECT_LT((a.values() - b.values()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ControlCost, InvertsHalfSigma) {
  EXPECT_NEAR(control_cost_from_A1(diffusion_field(bench::ou(11)))[3](0, 0), 1.0, 1e-15);
  const ProblemSpec s = bench::multiplicative(11);
  EXPECT_NEAR(control_cost_from_A1(diffusion_field(s))[5](0, 0), 2.0, 1e-15);  // x = 0

  const Grid g({Axis{0, 1, 3}, Axis{0, 1, 3}});
  SmallMatrix d(2, 2);
  d << 2, 0, 0, 4;
  const TensorField r = control_cost_from_A1(TensorField(g, std::vector<SmallMatrix>(g.size(), d)));
  EXPECT_DOUBLE_EQ(r[0](0, 0), 1.0);
  EXPECT_DOUBLE_EQ(r[0](1, 1), 0.5);
  EXPECT_EQ(r[0](0, 1), 0.0);
}

TEST(ControlCost, SingularSigmaRejected) {
  EXPECT_THROW(control_cost_from_A1(diffusion_field(bench::spec_1d("x1^2", "x1^2", -1, 1, 5))), SpdError);
}

// R (Sigma / 2) = I for random SPD matrices.
TEST(ControlCostProperty, A1RoundTrip) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n;
  const Grid g({Axis{0, 1, 4}, Axis{0, 1, 4}, Axis{0, 1, 4}});
  std::vector<SmallMatrix> vals;
  for (std::size_t i = 0; i < g.size(); ++i) {
    SmallMatrix a(3, 3);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) a(r, c) = n(rng);
    }
    SmallMatrix spd = a * a.transpose() + 0.1 * SmallMatrix::Identity(3, 3);
    vals.push_back(0.5 * (spd + spd.transpose()));
  }
  const TensorField sigma(g, vals);
  const TensorField r = control_cost_from_A1(sigma);
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    worst = std::max(worst, (r[i] * (0.5 * sigma[i]) - SmallMatrix::Identity(3, 3)).cwiseAbs().maxCoeff());
  }
  EXPECT_LE(worst, 1e-10);
}

TEST(A2Proxy, QuadraticPotentialPasses) {
  const ConstraintReport r = check_A2_proxy(potential_field(bench::ou()));
  EXPECT_TRUE(r.pass) << r.reason;
  ASSERT_EQ(r.shell_minima.size(), 5u);
  EXPECT_NEAR(r.shell_minima[1], 2 * std::pow(6 - 0.03, 2) - 2, 1e-8);
}

TEST(A2Proxy, FlatPotentialFails) {
  const ConstraintReport r = check_A2_proxy(bench::field("0", bench::ou().grid));
  EXPECT_FALSE(r.pass);
  EXPECT_FALSE(r.reason.empty());
}

TEST(A2Proxy, QuarticPotentialPasses) {
  EXPECT_TRUE(check_A2_proxy(bench::field("x1^4", bench::ou().grid)).pass);
}

TEST(A2Proxy, GridTooSmall) {
  EXPECT_THROW(check_A2_proxy(bench::field("x1^2", Grid({Axis{-1, 1, 7}}))), InputError);
}

TEST(A2ProxyProperty, ConstantShiftInvariant) {
  for (const char* phi : {"x1^2", "x1^4 - 3*x1^2", "0"}) {
    const ScalarField f = bench::field(phi, bench::ou().grid);
    const ScalarField g(f.grid(), f.values().array() + 5.0);
    const ConstraintReport a = check_A2_proxy(f);
    const ConstraintReport b = check_A2_proxy(g);
    EXPECT_EQ(a.pass, b.pass) << phi;
    for (std::size_t s = 0; s < a.shell_minima.size(); ++s) EXPECT_NEAR(a.shell_minima[s], b.shell_minima[s], 1e-8);
  }
}

TEST(ValidateSpec, OuAllPass) {
  ProblemSpec s = bench::ou();
  s.cost = parse_expression("0");
  const ValidationReport r = validate_spec(s);
  EXPECT_TRUE(r.all_pass());
  for (const Finding& f : r.findings) EXPECT_EQ(f.severity, Severity::pass) << f.check << ": " << f.message;
}

TEST(ValidateSpec, VanishingSigmaFailsSpd) {
  ProblemSpec s = bench::spec_1d("x1^2", "x1^2", -3, 3, 201);
  s.cost = parse_expression("x1^2");
  const ValidationReport r = validate_spec(s);
  EXPECT_FALSE(r.ok());
  EXPECT_NE(find(r, "spd", Severity::fail), nullptr);
}

TEST(ValidateSpec, UnboundedBelowCost) {
  ProblemSpec s = bench::spec_1d("x1^2", "2", -3, 3, 201);
  s.cost = parse_expression("-x1^2");
  const ValidationReport r = validate_spec(s);
  EXPECT_FALSE(r.ok());
  EXPECT_NE(find(r, "cost-lower-bound", Severity::warn), nullptr);
  EXPECT_NE(find(r, "cost-lower-bound", Severity::fail), nullptr);
}

TEST(ValidateSpec, StructureChecks) {
  ProblemSpec s = bench::ou(101);
  EXPECT_NE(find(validate_spec(s), "structure", Severity::fail), nullptr);  // neither q nor target
  s.cost = parse_expression("0");
  s.lambda = 1.0;
  EXPECT_NE(find(validate_spec(s), "structure", Severity::fail), nullptr);
  s.lambda = 2.0;
  s.mode = Mode::inverse;
  EXPECT_NE(find(validate_spec(s), "structure", Severity::fail), nullptr);
}

TEST(ValidateSpec, InverseModeChecksTargetConfinement) {
  ProblemSpec s = bench::spec_1d("x1^2", "2", -3, 3, 201);
  s.mode = Mode::inverse;
  s.target = parse_expression("1");
  EXPECT_NE(find(validate_spec(s), "A2", Severity::fail), nullptr);
  s.target = parse_expression("exp(-2*x1^2)");
  EXPECT_TRUE(validate_spec(s).all_pass());
  s.target = parse_expression("max(0, 1 - x1^2)");
  EXPECT_NE(find(validate_spec(s), "target", Severity::fail), nullptr);
}

TEST(TargetField, NormalisedToUnitMass) {
  ProblemSpec s = bench::ou();
  s.target = parse_expression("3*exp(-2*x1^2)");
  EXPECT_NEAR(target_field(s).integral(), 1.0, 1e-14);
}

TEST(VolatilityField, CholeskyOfSigmaWhenOnlySigmaGiven) {
  const ProblemSpec s = bench::double_well_2d(5, 5);
  const std::vector<Eigen::MatrixXd> vol = volatility_field(s);
  const TensorField sigma = diffusion_field(s);
  for (std::size_t i = 0; i < vol.size(); ++i) {
    EXPECT_LT((vol[i] * vol[i].transpose() - Eigen::MatrixXd(sigma[i])).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(AutoBox, GibbsWeightNegligibleOnBoundary) {
  const std::vector<Axis> axes = auto_box(parse_expression("x1^2"), 1, {101});
  ASSERT_EQ(axes.size(), 1u);
  EXPECT_GE(axes[0].upper * axes[0].upper, -std::log(1e-8));
  EXPECT_LT(axes[0].upper, 6.0);
  EXPECT_EQ(axes[0].lower, -axes[0].upper);
}
