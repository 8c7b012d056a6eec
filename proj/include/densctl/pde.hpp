#pragma once

// Time evolution of densities under the frozen steady-state control and of
// mass-preserving perturbations p = p_inf (1 + p~), with the modal solution
// p~(t) = sum_n p_n(0) exp(xi_n t) Xi_n as an independent cross-check.

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include "densctl/error.hpp"
#include "densctl/operators.hpp"
#include "densctl/spectral.hpp"

namespace densctl {

struct DensityTrajectory {
  std::vector<double> times;
  std::vector<double> mass;       // integral of the density (1 + <p~,1>_rho for perturbations)
  std::vector<double> norm;       // ||p/p_inf - 1||_rho, or ||p~||_rho for perturbations
  std::vector<double> min_value;  // pointwise minimum per stamp
  std::vector<double> snapshot_times;
  std::vector<ScalarField> snapshots;
  std::vector<std::string> warnings;
  bool positivity_violated = false;

  const ScalarField& final_state() const { return snapshots.back(); }
};

struct EvolveOptions {
  /// Store the state every `store_every` steps; 0 keeps only the first and last state.
  int store_every = 0;
};

struct PerturbationCoefficients {
  Eigen::VectorXd coefficients;  // p_n(0) = <p~0, Xi_n>_rho
  Eigen::VectorXd eigenvalues;
  double reconstruction_error = 0.0;

  double constant_mode() const { return coefficients[0]; }
};

namespace detail {

/// Crank-Nicolson stepping of dy/dt = M y; `observe(t, y)` is called on every stamp.
template <class Observe>
void crank_nicolson(const SparseMatrix& m, Eigen::VectorXd y, double dt, double horizon, Observe&& observe) {
  if (!(dt > 0.0)) throw InputError("time step must be positive");
  if (!(horizon >= 0.0)) throw InputError("horizon must be non-negative");
  const auto n = m.rows();
  const long steps = static_cast<long>(std::ceil(horizon / dt - 1e-9));

  Eigen::SparseMatrix<double> id(n, n);
  id.setIdentity();
  const Eigen::SparseMatrix<double> mc(m);
  const Eigen::SparseMatrix<double> lhs = id - 0.5 * dt * mc;
  const Eigen::SparseMatrix<double> rhs = id + 0.5 * dt * mc;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.analyzePattern(lhs);
  lu.factorize(lhs);
  if (lu.info() != Eigen::Success) throw NumericalError("Crank-Nicolson factorisation failed");

  observe(0L, 0.0, y);
  for (long k = 1; k <= steps; ++k) {
    y = lu.solve(rhs * y);
    if (lu.info() != Eigen::Success || !y.allFinite()) throw NumericalError("Crank-Nicolson solve failed");
    observe(k, static_cast<double>(k) * dt, y);
  }
}

/// Records the first time a density dips below -1e-10; Crank-Nicolson only
/// keeps positivity when dt is small against the stiff end of the spectrum.
inline void positivity_watchdog(DensityTrajectory& traj, double t, double min_density) {
  if (traj.positivity_violated || min_density >= -1e-10) return;
  traj.positivity_violated = true;
  traj.warnings.push_back("density reached " + std::to_string(min_density) + " at t = " + std::to_string(t) +
                          "; reduce dt");
}

}  // namespace detail

inline DensityTrajectory evolve_fp(const AdjointOperator& a, const ScalarField& p0, double dt, double horizon,
                                   const EvolveOptions& opt = {}) {
  require_same_grid(a.grid, p0.grid(), "evolve_fp");
  const Grid& g = p0.grid();
  const double w = g.cell_volume();
  DensityTrajectory traj;

  if (p0.min() < -1e-12) throw DomainError("initial density is negative at some node");
  Eigen::VectorXd y = p0.values();
  const double m0 = y.sum() * w;
  if (std::abs(m0 - 1.0) > 1e-8) {
    traj.warnings.push_back("initial density had mass " + std::to_string(m0) + "; renormalised");
    y /= m0;
  }

  const Eigen::ArrayXd rho = a.weight.values().array();
  const long steps = static_cast<long>(std::ceil(horizon / dt - 1e-9));
  detail::crank_nicolson(a.matrix, std::move(y), dt, horizon, [&](long k, double t, const Eigen::VectorXd& p) {
    traj.times.push_back(t);
    traj.mass.push_back(p.sum() * w);
    traj.norm.push_back(std::sqrt(w * ((p.array() - rho).square() / rho).sum()));
    traj.min_value.push_back(p.minCoeff());
    detail::positivity_watchdog(traj, t, traj.min_value.back());
    if (k == 0 || k == steps || (opt.store_every > 0 && k % opt.store_every == 0)) {
      traj.snapshot_times.push_back(t);
      traj.snapshots.emplace_back(g, p);
    }
  });
  return traj;
}

/// f - <f,1>_rho / <1,1>_rho.
inline ScalarField project_mass_zero(const ScalarField& f, const ScalarField& rho) {
  const ScalarField one = ScalarField::constant(f.grid(), 1.0);
  const double mean = weighted_inner(f, one, rho) / weighted_inner(one, one, rho);
  return ScalarField(f.grid(), f.values().array() - mean);
}

inline DensityTrajectory evolve_perturbation(const GeneratorOperator& gop, const ScalarField& p0, double dt,
                                             double horizon, const EvolveOptions& opt = {}) {
  require_same_grid(gop.grid, p0.grid(), "evolve_perturbation");
  const ScalarField& rho = gop.weight;
  const ScalarField one = ScalarField::constant(p0.grid(), 1.0);
  const double mean = weighted_inner(p0, one, rho);
  const double scale = std::max(1.0, weighted_norm(p0, rho));
  if (std::abs(mean) > 1e-8 * scale) {
    throw InputError("perturbation is not mass preserving (<p,1>_rho = " + std::to_string(mean) +
                     "); project it with project_mass_zero first");
  }

  const Grid& g = p0.grid();
  const double w = g.cell_volume();
  const Eigen::ArrayXd wr = w * rho.values().array();
  const long steps = static_cast<long>(std::ceil(horizon / dt - 1e-9));
  const bool watch = (1.0 + p0.values().array()).minCoeff() >= 0.0;  // only when rho (1 + p~0) is a density
  DensityTrajectory traj;
  detail::crank_nicolson(gop.matrix, p0.values(), dt, horizon, [&](long k, double t, const Eigen::VectorXd& p) {
    traj.times.push_back(t);
    traj.mass.push_back(1.0 + (wr * p.array()).sum());
    traj.norm.push_back(std::sqrt((wr * p.array().square()).sum()));
    traj.min_value.push_back(p.minCoeff());
    if (watch) detail::positivity_watchdog(traj, t, (rho.values().array() * (1.0 + p.array())).minCoeff());
    if (k == 0 || k == steps || (opt.store_every > 0 && k % opt.store_every == 0)) {
      traj.snapshot_times.push_back(t);
      traj.snapshots.emplace_back(g, p);
    }
  });
  return traj;
}

inline PerturbationCoefficients expand_in_eigenbasis(const ScalarField& p0, const Spectrum& s) {
  require_same_grid(p0.grid(), s.grid, "expand_in_eigenbasis");
  const double w = s.grid.cell_volume();
  const Eigen::ArrayXd wr = w * s.weight.values().array();
  PerturbationCoefficients c;
  c.eigenvalues = s.eigenvalues;
  c.coefficients.resize(s.count());
  Eigen::VectorXd recon = Eigen::VectorXd::Zero(p0.values().size());
  for (int n = 0; n < s.count(); ++n) {
    c.coefficients[n] = (wr * p0.values().array() * s.eigenfunctions.col(n).array()).sum();
    recon += c.coefficients[n] * s.eigenfunctions.col(n);
  }
  c.reconstruction_error = std::sqrt((wr * (p0.values() - recon).array().square()).sum());
  return c;
}

/// sum_n p_n(0) exp(xi_n t) Xi_n.
inline ScalarField eigen_evolution(const PerturbationCoefficients& c, const Spectrum& s, double t) {
  if (t < 0.0) throw InputError("eigen_evolution needs t >= 0");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(s.eigenfunctions.rows());
  for (int n = 0; n < s.count(); ++n) {
    out += c.coefficients[n] * std::exp(c.eigenvalues[n] * t) * s.eigenfunctions.col(n);
  }
  return ScalarField(s.grid, std::move(out));
}

/// Least-squares slope of log(norm) against time over [t_lo, t_hi].
inline double fit_decay_rate(const std::vector<double>& times, const std::vector<double>& norm, double t_lo,
                             double t_hi) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < t_lo - 1e-12 || times[i] > t_hi + 1e-12 || !(norm[i] > 0.0)) continue;
    const double x = times[i];
    const double y = std::log(norm[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) throw InputError("decay fit window holds fewer than two positive samples");
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace densctl
