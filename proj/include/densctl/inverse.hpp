#pragma once

// Inverse problem: from a desired stationary density p_inf, recover the
// desirability Psi = sqrt(p_inf exp(phi)) (up to scale), the state cost q that
// makes Psi the principal eigenfunction, the value v = -2 log Psi and the
// control. The split between q and c is fixed by the gauge min q = 0.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "densctl/error.hpp"
#include "densctl/grid.hpp"
#include "densctl/model.hpp"
#include "densctl/operators.hpp"
#include "densctl/spectral.hpp"

namespace densctl {

struct InverseSolution {
  ScalarField target;        // normalised p_inf
  ScalarField desirability;  // Psi > 0, sum w Psi^2 exp(-phi) = 1
  ScalarField cost;          // q, min q = 0
  double c = 0.0;
  ScalarField value;
  VectorField control;
  std::vector<std::string> warnings;
};

struct RoundTripReport {
  double c_inverse = 0.0;
  double c_forward = 0.0;
  double cost_error = 0.0;     // |c_forward - c_inverse|
  double density_error = 0.0;  // sup |p_forward - p_target| / sup p_target
  double control_error = 0.0;  // interior sup |u_forward - u_target|
  double controlled_gap = 0.0;
  double uncontrolled_gap = 0.0;
  double growth_ratio = 0.0;   // outer / central max of q / (1 + |x|^2)
  bool quadratic_growth = true;
  ScalarField recovered_density;
  std::vector<std::string> warnings;
};

namespace detail {

inline Eigen::VectorXd log_of_positive(const ScalarField& p, const char* what) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0.0)) {
      throw DomainError(std::string(what) + " is not strictly positive at " + p.grid().describe_node(i));
    }
  }
  return p.values().array().log().matrix();
}

}  // namespace detail

/// Psi = sqrt(p exp(phi)), scaled so that sum w Psi^2 exp(-phi) = 1.
inline ScalarField desirability_from_target(const ScalarField& target, const ScalarField& phi,
                                            std::vector<std::string>* warnings = nullptr) {
  require_same_grid(target.grid(), phi.grid(), "desirability_from_target");
  const Grid& g = target.grid();
  const double mass = target.integral();
  if (std::abs(mass - 1.0) > 1e-8 && warnings) {
    warnings->push_back("target density had mass " + std::to_string(mass) + "; renormalised");
  }
  const Eigen::VectorXd log_p = detail::log_of_positive(target, "target density");
  Eigen::VectorXd log_psi = 0.5 * (log_p + phi.values());
  const double log_norm = detail::log_sum_exp(2.0 * log_psi - phi.values(), std::log(g.cell_volume()));
  log_psi.array() -= 0.5 * log_norm;
  return ScalarField(g, log_psi.array().exp().matrix());
}

/// q~ = lambda (G0 Psi) / Psi, c = -min q~, q = q~ + c.
inline std::pair<ScalarField, double> cost_from_target(const ScalarField& psi, const TensorField& sigma,
                                                       const ScalarField& phi, double lambda = 2.0) {
  if (lambda != 2.0) throw InputError("the inverse construction requires lambda = 2");
  require_same_grid(psi.grid(), phi.grid(), "cost_from_target");
  const Grid& g = psi.grid();
  const double floor = 1e-12 * psi.max();
  std::string small;
  int count = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(psi[i] > 0.0)) throw DomainError("desirability not positive at " + g.describe_node(i));
    if (psi[i] < floor) {
      if (count < 5) small += (count ? ", " : "") + g.describe_node(i);
      ++count;
    }
  }
  if (count > 0) {
    throw NumericalError("desirability below 1e-12 of its maximum at " + std::to_string(count) + " nodes (" + small +
                         (count > 5 ? ", ..." : "") + "); shrink the box");
  }
  const GeneratorOperator g0 = assemble_generator(sigma, phi, g);
  const Eigen::VectorXd qt = lambda * (g0.matrix * psi.values()).cwiseQuotient(psi.values());
  const double c = -qt.minCoeff();
  Eigen::VectorXd q = qt.array() + c;
  return {ScalarField(g, std::move(q)), c};
}

/// u = R^{-1} (grad p + p grad phi) / p, evaluated as R^{-1} (grad log p + grad phi).
inline VectorField control_from_target(const ScalarField& target, const ScalarField& phi, const TensorField& r) {
  require_same_grid(target.grid(), phi.grid(), "control_from_target");
  require_same_grid(target.grid(), r.grid(), "control_from_target");
  const Grid& g = target.grid();
  const ScalarField log_p(g, detail::log_of_positive(target, "target density"));
  const VectorField grad_lp = fd::gradient(log_p);
  const VectorField grad_phi = fd::gradient(phi);
  Eigen::MatrixXd u(static_cast<Eigen::Index>(g.size()), g.dim());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const SmallMatrix r_inv = r[i].inverse();
    u.row(static_cast<Eigen::Index>(i)) = (r_inv * (grad_lp.at(i) + grad_phi.at(i))).transpose();
  }
  return VectorField(g, std::move(u));
}

/// WARN text if the tabulated target looks noisy: fourth differences of log p
/// comparable to its second differences along some axis.
inline std::optional<std::string> roughness_warning(const ScalarField& target) {
  const Grid& g = target.grid();
  const Eigen::VectorXd lp = detail::log_of_positive(target, "target density");
  for (int k = 0; k < g.dim(); ++k) {
    const Eigen::VectorXd d2 = fd::second_derivative(g, lp, k);
    const ScalarField d2f(g, d2);
    const Eigen::VectorXd d4 = fd::second_derivative(g, d2f.values(), k);
    const double h2 = g.spacing(k) * g.spacing(k);
    double m2 = 0.0, m4 = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g.shell(i) < 2) continue;
      m2 = std::max(m2, std::abs(d2[static_cast<Eigen::Index>(i)]) * h2);
      m4 = std::max(m4, std::abs(d4[static_cast<Eigen::Index>(i)]) * h2 * h2);
    }
    if (m4 > 0.5 * m2 && m4 > 1e-10) {
      return "tabulated target is rough along x" + std::to_string(k + 1) +
             " (fourth differences of log p comparable to second differences); q involves second derivatives";
    }
  }
  return std::nullopt;
}

inline InverseSolution solve_inverse(const ScalarField& target, const TensorField& sigma, const ScalarField& phi,
                                     double lambda = 2.0, double eps_spd = 1e-8) {
  sigma.require_spd(eps_spd);
  InverseSolution s;
  const double mass = target.integral();
  if (!(mass > 0.0)) throw DomainError("target density has non-positive mass");
  s.desirability = desirability_from_target(target, phi, &s.warnings);
  s.target = ScalarField(target.grid(), target.values() / mass);
  auto [q, c] = cost_from_target(s.desirability, sigma, phi, lambda);
  s.cost = std::move(q);
  s.c = c;
  s.value = ScalarField(target.grid(), -lambda * s.desirability.values().array().log().matrix());
  s.control = control_from_target(s.target, phi, control_cost_from_A1(sigma, eps_spd));
  return s;
}

inline InverseSolution solve_inverse(const ProblemSpec& spec) {
  InverseSolution s = solve_inverse(target_field(spec), diffusion_field(spec), potential_field(spec), spec.lambda,
                                    spec.eps_spd);
  if (spec.target_table) {
    if (auto w = roughness_warning(*spec.target_table)) s.warnings.push_back(*w);
  }
  return s;
}

namespace detail {

/// Max of q / (1 + |x|^2) over the outer quarter of shells (boundary shell
/// excluded) relative to its max over the central half of the box.
inline double growth_ratio(const ScalarField& q) {
  const Grid& g = q.grid();
  const int shells = g.shell_count();
  const int outer = std::max(2, shells / 4);
  double m_out = 0.0, m_in = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const int s = g.shell(i);
    const double r = q[i] / (1.0 + g.point(i).squaredNorm());
    if (s >= 1 && s < outer) m_out = std::max(m_out, r);
    if (g.in_interior(i, 0.5)) m_in = std::max(m_in, r);
  }
  if (m_in <= 0.0) return m_out > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  return m_out / m_in;
}

}  // namespace detail

inline RoundTripReport roundtrip_verify(const InverseSolution& inv, const TensorField& sigma, const ScalarField& phi,
                                        double lambda = 2.0, const SpectralOptions& opt = {},
                                        double interior_fraction = 0.5) {
  const Grid& g = phi.grid();
  RoundTripReport rep;
  rep.warnings = inv.warnings;
  rep.c_inverse = inv.c;

  const HJBSolution fwd = solve_hjb_principal(sigma, phi, inv.cost, lambda, opt);
  rep.c_forward = fwd.cost;
  rep.cost_error = std::abs(fwd.cost - inv.c);
  rep.recovered_density = fwd.density;
  rep.density_error = (fwd.density.values() - inv.target.values()).cwiseAbs().maxCoeff() / inv.target.max();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.shell(i) < 1 || !g.in_interior(i, interior_fraction)) continue;
    rep.control_error = std::max(rep.control_error, (fwd.control.at(i) - inv.control.at(i)).cwiseAbs().maxCoeff());
  }

  const int k = std::min<int>(2, static_cast<int>(g.size()));
  rep.controlled_gap = spectral_gap(eig_generator(controlled_generator(fwd, sigma), k, opt));
  rep.uncontrolled_gap = spectral_gap(eig_generator(assemble_generator(sigma, phi, g), k, opt));

  rep.growth_ratio = detail::growth_ratio(inv.cost);
  rep.quadratic_growth = rep.growth_ratio <= 2.0;
  if (!rep.quadratic_growth) {
    rep.warnings.push_back("synthesised q grows faster than quadratically toward the boundary");
  }
  return rep;
}

inline RoundTripReport roundtrip_verify(const ScalarField& target, const ProblemSpec& spec,
                                        const SpectralOptions& opt = {}) {
  const TensorField sigma = diffusion_field(spec);
  const ScalarField phi = potential_field(spec);
  const InverseSolution inv = solve_inverse(target, sigma, phi, spec.lambda, spec.eps_spd);
  return roundtrip_verify(inv, sigma, phi, spec.lambda, opt);
}

}  // namespace densctl
