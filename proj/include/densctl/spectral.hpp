#pragma once

// Eigenanalysis of the generator and the stationary HJB solve.
//
// The generator is self-adjoint in L^2(rho), so S = D(sqrt rho) G D(1/sqrt rho)
// is symmetric and shares its spectrum. Eigenfunctions are mapped back with
// D(1/sqrt rho) and come out rho-orthonormal.
//
// With R^{-1} = Sigma/2 the log transform Psi = exp(-v/2) linearises the
// stationary HJB equation into the principal eigenproblem
//     (L0 - q/2) Psi = -(c/2) Psi,
// L0 being the uncontrolled generator built from phi. The optimal density is
// then p = Psi^2 exp(-phi) / Z and the controlled potential is phi + v.

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include "densctl/eigensolver.hpp"
#include "densctl/error.hpp"
#include "densctl/grid.hpp"
#include "densctl/model.hpp"
#include "densctl/operators.hpp"

namespace densctl {

struct Spectrum {
  Grid grid;
  Eigen::VectorXd eigenvalues;     // descending, eigenvalues[0] ~ 0
  Eigen::MatrixXd eigenfunctions;  // node-count x k, rho-orthonormal columns
  ScalarField weight;

  int count() const { return static_cast<int>(eigenvalues.size()); }
  double eigenvalue(int n) const { return eigenvalues[n]; }
  ScalarField mode(int n) const { return ScalarField(grid, eigenfunctions.col(n)); }
};

using SpectralOptions = EigenOptions;

namespace detail {

/// D(e^{l/2}) M D(e^{-l/2}) for log-weights l, symmetrised after checking that
/// the input is symmetric up to `tol` (relative, entrywise).
inline SparseMatrix symmetrize(const SparseMatrix& m, const Eigen::VectorXd& log_weight, double tol = 1e-10) {
  SparseMatrix s = m;
  for (Eigen::Index r = 0; r < s.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(s, r); it; ++it) {
      it.valueRef() *= std::exp(0.5 * (log_weight[it.row()] - log_weight[it.col()]));
    }
  }
  const SparseMatrix st = s.transpose();
  const SparseMatrix diff = s - st;
  for (Eigen::Index r = 0; r < diff.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(diff, r); it; ++it) {
      const double ref = std::max({1.0, std::abs(s.coeff(it.row(), it.col())), std::abs(st.coeff(it.row(), it.col()))});
      if (std::abs(it.value()) > tol * ref) {
        throw NumericalError("detailed balance violated between nodes " + std::to_string(it.row()) + " and " +
                             std::to_string(it.col()) + "; refusing to symmetrise");
      }
    }
  }
  return SparseMatrix(0.5 * (s + st));
}

}  // namespace detail

inline Spectrum eig_generator(const GeneratorOperator& op, int k, const SpectralOptions& opt = {}) {
  if (k < 1 || static_cast<std::size_t>(k) > op.size()) {
    throw InputError("requested " + std::to_string(k) + " modes of a " + std::to_string(op.size()) + "-node operator");
  }
  const Grid& g = op.grid;
  const SparseMatrix s = detail::symmetrize(op.matrix, op.log_weight);
  const EigenPairs pairs = largest_eigenpairs(s, k, opt);

  const double w = g.cell_volume();
  const Eigen::ArrayXd inv_sqrt = (-0.5 * op.log_weight.array()).exp() / std::sqrt(w);
  Eigen::MatrixXd modes(static_cast<Eigen::Index>(g.size()), k);
  for (int n = 0; n < k; ++n) {
    modes.col(n) = (pairs.vectors.col(n).array() * inv_sqrt).matrix();
  }

  const Eigen::ArrayXd wr = w * op.weight.values().array();
  const auto inner = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (wr * a.array() * b.array()).sum(); };

  // Constants span the kernel exactly (G 1 = 0); snap the computed ground mode onto it.
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(g.size()));
  {
    Eigen::VectorXd m0 = modes.col(0);
    const double c = inner(m0, ones);
    if (c < 0.0) m0 = -m0;
    if (std::sqrt(std::max(0.0, inner(m0 - ones, m0 - ones))) <= 1e-6) {
      modes.col(0) = ones / std::sqrt(inner(ones, ones));
      for (int n = 1; n < k; ++n) {
        Eigen::VectorXd v = modes.col(n);
        v -= inner(v, modes.col(0)) * modes.col(0);
        modes.col(n) = v / std::sqrt(inner(v, v));
      }
    }
  }

  // Sign convention: positive at the first node where |Xi_n| > 1e-6.
  for (int n = 0; n < k; ++n) {
    for (Eigen::Index i = 0; i < modes.rows(); ++i) {
      if (std::abs(modes(i, n)) > 1e-6) {
        if (modes(i, n) < 0.0) modes.col(n) *= -1.0;
        break;
      }
    }
  }

  Spectrum out;
  out.grid = g;
  out.eigenvalues = pairs.values;
  out.eigenfunctions = std::move(modes);
  out.weight = op.weight;
  return out;
}

/// Decay rate -xi_1 of the slowest non-constant mode.
inline double spectral_gap(const Spectrum& s) {
  if (s.count() < 2) throw InputError("spectral gap needs at least two eigenvalues");
  const double xi1 = s.eigenvalue(1);
  if (!(xi1 < 0.0)) {
    throw NumericalError("second eigenvalue is not negative (" + std::to_string(xi1) +
                         "): potential not confining or grid pathology");
  }
  return -xi1;
}

// ---------------------------------------------------------------------------
// Stationary HJB
// ---------------------------------------------------------------------------

struct HJBSolution {
  Grid grid;
  double lambda = 2.0;
  double cost = 0.0;                   // optimal average cost c
  double principal_eigenvalue = 0.0;   // mu_0 = -c / lambda
  ScalarField desirability;            // Psi > 0 with sum w Psi^2 exp(-phi) = 1
  Eigen::VectorXd log_desirability;
  ScalarField value;                   // v = -lambda log Psi
  ScalarField density;                 // p = Psi^2 exp(-phi) / Z
  VectorField control;                 // u = -R^{-1} grad v = -(Sigma/2) grad v
  ScalarField controlled_potential;    // Phi = phi + v
};

/// u = -(Sigma/2) grad v.
inline VectorField control_from_value(const TensorField& sigma, const ScalarField& value) {
  const VectorField grad = fd::gradient(value);
  const Grid& g = value.grid();
  Eigen::MatrixXd u(static_cast<Eigen::Index>(g.size()), g.dim());
  for (std::size_t i = 0; i < g.size(); ++i) {
    u.row(static_cast<Eigen::Index>(i)) = (-0.5 * sigma[i] * grad.at(i)).transpose();
  }
  return VectorField(g, std::move(u));
}

namespace detail {

inline HJBSolution finish_hjb(const TensorField& sigma, const ScalarField& phi, double lambda, double cost,
                              const Eigen::VectorXd& log_psi_rho) {
  // log_psi_rho is normalised in L^2(rho0), rho0 = exp(-phi)/Z0.
  const Grid& g = phi.grid();
  const double w = g.cell_volume();
  const Eigen::VectorXd neg_phi = -phi.values();
  const double log_z0 = detail::log_sum_exp(neg_phi, std::log(w));
  const Eigen::VectorXd log_rho0 = neg_phi.array() - log_z0;

  HJBSolution sol;
  sol.grid = g;
  sol.lambda = lambda;
  sol.cost = cost;
  sol.principal_eigenvalue = -cost / lambda;
  sol.log_desirability = log_psi_rho.array() - 0.5 * log_z0;
  sol.desirability = ScalarField(g, sol.log_desirability.array().exp().matrix());
  sol.value = ScalarField(g, -lambda * sol.log_desirability);
  sol.density = ScalarField(g, (2.0 * log_psi_rho + log_rho0).array().exp().matrix());
  sol.controlled_potential = ScalarField(g, phi.values() + sol.value.values());
  sol.control = control_from_value(sigma, sol.value);
  return sol;
}

}  // namespace detail

inline HJBSolution solve_hjb_principal(const TensorField& sigma, const ScalarField& phi, const ScalarField& q,
                                       double lambda = 2.0, const SpectralOptions& opt = {}) {
  if (lambda != 2.0) throw InputError("the linearised HJB requires lambda = 2 (R^{-1} = Sigma/2)");
  require_same_grid(phi.grid(), q.grid(), "solve_hjb_principal");
  const Grid& g = phi.grid();
  const GeneratorOperator g0 = assemble_generator(sigma, phi, g);
  const auto n = static_cast<Eigen::Index>(g.size());

  if (q.max() == q.min()) {
    // L0 kills constants: Psi is constant and c equals the constant cost.
    return detail::finish_hjb(sigma, phi, lambda, q[0], Eigen::VectorXd::Zero(n));
  }

  const SparseMatrix m = SparseMatrix(g0.matrix) - SparseMatrix((q.values() / lambda).asDiagonal());
  const SparseMatrix s = detail::symmetrize(m, g0.log_weight);
  const EigenPairs pairs = largest_eigenpairs(s, std::min<int>(2, static_cast<int>(n)), opt);

  // Back to Psi-space; the Perron vector has one sign.
  const double w = g.cell_volume();
  const Eigen::ArrayXd inv_sqrt = (-0.5 * g0.log_weight.array()).exp();
  Eigen::VectorXd y = pairs.vectors.col(0);
  if (y.sum() < 0.0) y = -y;
  if (y.minCoeff() < -1e-12 * y.cwiseAbs().maxCoeff() - 1e-14) {
    throw NumericalError("principal eigenvector changes sign: assembly lost monotonicity");
  }
  Eigen::VectorXd psi = (y.cwiseAbs().array() * inv_sqrt).matrix();

  // Inverse iteration on the M-matrix (mu I - M) recovers the tails of Psi to
  // componentwise relative accuracy; the inverse is entrywise positive.
  const double mu0 = pairs.values[0];
  const double sep = pairs.values.size() > 1 ? pairs.values[0] - pairs.values[1] : 1.0;
  const double mu = mu0 + 1e-4 * std::max(sep, 1e-8);
  Eigen::SparseMatrix<double> shifted(n, n);
  shifted.setIdentity();
  shifted *= mu;
  shifted -= Eigen::SparseMatrix<double>(m);
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.analyzePattern(shifted);
  lu.factorize(shifted);
  if (lu.info() != Eigen::Success) throw NumericalError("principal refinement factorisation failed");
  psi /= psi.maxCoeff();
  for (int it = 0; it < 50; ++it) {
    Eigen::VectorXd next = lu.solve(psi);
    next /= next.maxCoeff();
    const double change = ((next - psi).array().abs() / next.array().abs().max(1e-300)).maxCoeff();
    psi = next;
    if (change < 1e-13) break;
  }
  if (psi.minCoeff() < -1e-12) throw NumericalError("desirability not positive: assembly lost monotonicity");
  if (!(psi.minCoeff() > 0.0)) throw NumericalError("desirability underflows to zero on the grid; shrink the box");

  const Eigen::ArrayXd rho0 = g0.weight.values().array();
  const double norm2 = w * (rho0 * psi.array().square()).sum();
  const double rq = w * (rho0 * psi.array() * (m * psi).array()).sum() / norm2;
  const Eigen::VectorXd log_psi = psi.array().log() - 0.5 * std::log(norm2);
  return detail::finish_hjb(sigma, phi, lambda, -lambda * rq, log_psi);
}

/// Generator of the optimally controlled process (potential phi + v).
inline GeneratorOperator controlled_generator(const HJBSolution& sol, const TensorField& sigma) {
  return assemble_generator(sigma, sol.controlled_potential, sol.grid);
}

/// max |A_ctrl p| for the adjoint of the controlled generator.
inline double stationarity_residual(const HJBSolution& sol, const TensorField& sigma) {
  const AdjointOperator a = adjoint_of(controlled_generator(sol, sigma));
  return (a.matrix * sol.density.values()).cwiseAbs().maxCoeff();
}

/// Interior max of |q - c - |grad v|^2_{R^{-1}}/2 + grad v . b + tr(Sigma Hess v)/2|,
/// interior being the central `interior_fraction` of the box minus the boundary layer.
inline double verify_hjb_residual(const HJBSolution& sol, const ScalarField& q, const TensorField& sigma,
                                  const ScalarField& phi, const TensorField& control_cost,
                                  double interior_fraction = 0.5) {
  const Grid& g = sol.grid;
  const VectorField b = drift_from_potential(sigma, phi);
  const VectorField grad = fd::gradient(sol.value);
  const Eigen::VectorXd hess = fd::hessian_contraction(sigma, sol.value);
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.shell(i) < 1 || !g.in_interior(i, interior_fraction)) continue;
    const SmallVector dv = grad.at(i);
    const SmallMatrix r_inv = control_cost[i].inverse();
    const double res = q[i] - sol.cost - 0.5 * dv.dot(r_inv * dv) + dv.dot(b.at(i)) + 0.5 * hess[static_cast<Eigen::Index>(i)];
    worst = std::max(worst, std::abs(res));
  }
  return worst;
}

}  // namespace densctl
