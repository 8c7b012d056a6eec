#pragma once

// Discrete generator L f = (1/(2 rho)) div(rho Sigma grad f), rho ~ exp(-Phi),
// and its Fokker-Planck adjoint.
//
// For a reversible drift b = div(Sigma)/2 - Sigma grad(Phi)/2 this divergence
// form equals b.grad f + tr(Sigma Hess f)/2. Sigma is split into rank-one
// direction terms, Sigma = sum_d a_d d d^T with d running over the axis steps
// h_k e_k and one diagonal h_k e_k +- h_l e_l per axis pair (sign of Sigma_kl),
// which gives the 5/7-point stencil in 2D. Each edge (p, p+d) carries the flux
// coefficient sqrt(rho_p rho_{p+d}) * mean(a_d) / 2, so D(rho) G is symmetric,
// G 1 = 0 and rho is stationary up to rounding. Boundary edges are dropped
// (zero flux through the box faces).

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "densctl/error.hpp"
#include "densctl/grid.hpp"

namespace densctl {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct GeneratorOperator {
  Grid grid;
  SparseMatrix matrix;
  ScalarField weight;           // rho, normalised so sum w rho = 1
  Eigen::VectorXd log_weight;   // log rho, kept separately to avoid underflow in the tails
  TensorField diffusion;
  ScalarField potential;
  Boundary boundary = Boundary::zero_flux;

  std::size_t size() const { return grid.size(); }
};

struct AdjointOperator {
  Grid grid;
  SparseMatrix matrix;  // D(rho) G D(rho)^{-1}
  ScalarField weight;

  std::size_t size() const { return grid.size(); }
};

namespace detail {

struct Direction {
  std::array<int, kMaxDim> offset{};  // index offset
  int axis_a = 0;
  int axis_b = -1;  // -1 for axis-aligned directions
  int sign = 0;     // +1 for e_a + e_b, -1 for e_a - e_b
};

/// Coefficient a_d(x) of direction `d` in the decomposition of Sigma(x).
inline double direction_coefficient(const Grid& g, const SmallMatrix& s, const Direction& d) {
  if (d.axis_b < 0) {
    const int k = d.axis_a;
    const double hk = g.spacing(k);
    double diag = s(k, k);
    for (int l = 0; l < g.dim(); ++l) {
      if (l != k) diag -= std::abs(0.5 * (s(k, l) + s(l, k))) * hk / g.spacing(l);
    }
    return diag / (hk * hk);
  }
  const double off = 0.5 * (s(d.axis_a, d.axis_b) + s(d.axis_b, d.axis_a));
  if ((off > 0.0 && d.sign > 0) || (off < 0.0 && d.sign < 0)) {
    return std::abs(off) / (g.spacing(d.axis_a) * g.spacing(d.axis_b));
  }
  return 0.0;
}

inline std::vector<Direction> stencil_directions(const TensorField& sigma) {
  const Grid& g = sigma.grid();
  std::vector<Direction> dirs;
  for (int k = 0; k < g.dim(); ++k) {
    Direction d;
    d.offset[static_cast<std::size_t>(k)] = 1;
    d.axis_a = k;
    dirs.push_back(d);
  }
  for (int k = 0; k < g.dim(); ++k) {
    for (int l = k + 1; l < g.dim(); ++l) {
      bool pos = false;
      bool neg = false;
      for (const SmallMatrix& m : sigma.values()) {
        pos = pos || m(k, l) > 0.0;
        neg = neg || m(k, l) < 0.0;
      }
      for (int sign : {+1, -1}) {
        if ((sign > 0 && !pos) || (sign < 0 && !neg)) continue;
        Direction d;
        d.offset[static_cast<std::size_t>(k)] = 1;
        d.offset[static_cast<std::size_t>(l)] = sign;
        d.axis_a = k;
        d.axis_b = l;
        d.sign = sign;
        dirs.push_back(d);
      }
    }
  }
  return dirs;
}

inline double log_sum_exp(const Eigen::VectorXd& v, double log_scale) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum()) + log_scale;
}

}  // namespace detail

/// log rho for rho = exp(-Phi) / Z with sum w rho = 1.
inline Eigen::VectorXd normalized_log_weight(const ScalarField& potential) {
  const Eigen::VectorXd neg = -potential.values();
  const double log_z = detail::log_sum_exp(neg, std::log(potential.grid().cell_volume()));
  return neg.array() - log_z;
}

inline GeneratorOperator assemble_generator(const TensorField& sigma, const ScalarField& potential, const Grid& g,
                                            double eps_spd = 1e-8) {
  require_same_grid(sigma.grid(), g, "assemble_generator");
  require_same_grid(potential.grid(), g, "assemble_generator");
  sigma.require_spd(eps_spd);

  const Eigen::VectorXd log_rho = normalized_log_weight(potential);
  const std::vector<detail::Direction> dirs = detail::stencil_directions(sigma);

  std::vector<std::vector<double>> coeff(dirs.size(), std::vector<double>(g.size()));
  for (std::size_t d = 0; d < dirs.size(); ++d) {
    for (std::size_t i = 0; i < g.size(); ++i) coeff[d][i] = detail::direction_coefficient(g, sigma[i], dirs[d]);
  }

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(g.size() * (2 * dirs.size() + 1));
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.size()));

  for (std::size_t p = 0; p < g.size(); ++p) {
    const auto idx = g.multi_index(p);
    for (std::size_t d = 0; d < dirs.size(); ++d) {
      std::array<int, kMaxDim> nb = idx;
      bool inside = true;
      for (int k = 0; k < g.dim(); ++k) {
        nb[static_cast<std::size_t>(k)] += dirs[d].offset[static_cast<std::size_t>(k)];
        if (nb[static_cast<std::size_t>(k)] < 0 || nb[static_cast<std::size_t>(k)] >= g.axis(k).nodes) inside = false;
      }
      if (!inside) continue;
      std::size_t q = 0;
      for (int k = 0; k < g.dim(); ++k) q += static_cast<std::size_t>(nb[static_cast<std::size_t>(k)]) * g.stride(k);

      const double a = 0.5 * (coeff[d][p] + coeff[d][q]);
      if (a < 0.0) {
        std::ostringstream os;
        os << "negative off-diagonal " << a << " between " << g.describe_node(p) << " and " << g.describe_node(q)
           << ": Sigma is not diagonally dominant relative to the grid aspect ratio; adjust the spacing";
        throw NumericalError(os.str());
      }
      if (a == 0.0) continue;
      const auto pi = static_cast<Eigen::Index>(p);
      const auto qi = static_cast<Eigen::Index>(q);
      const double half_diff = 0.5 * (log_rho[qi] - log_rho[pi]);
      const double gpq = std::exp(half_diff) * 0.5 * a;   // sqrt(rho_q/rho_p) a/2
      const double gqp = std::exp(-half_diff) * 0.5 * a;  // sqrt(rho_p/rho_q) a/2
      trip.emplace_back(pi, qi, gpq);
      trip.emplace_back(qi, pi, gqp);
      diag[pi] -= gpq;
      diag[qi] -= gqp;
    }
  }
  for (Eigen::Index i = 0; i < diag.size(); ++i) trip.emplace_back(i, i, diag[i]);

  GeneratorOperator op;
  op.grid = g;
  op.matrix.resize(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(g.size()));
  op.matrix.setFromTriplets(trip.begin(), trip.end());
  op.matrix.makeCompressed();
  op.log_weight = log_rho;
  op.weight = ScalarField(g, log_rho.array().exp().matrix());
  op.diffusion = sigma;
  op.potential = potential;
  return op;
}

inline AdjointOperator adjoint_of(const GeneratorOperator& gop) {
  AdjointOperator a;
  a.grid = gop.grid;
  a.matrix = SparseMatrix(gop.matrix.transpose());
  a.weight = gop.weight;
  return a;
}

inline ScalarField apply(const SparseMatrix& m, const ScalarField& f) {
  if (static_cast<std::size_t>(m.cols()) != f.size()) throw ShapeError("operator and field sizes differ");
  return ScalarField(f.grid(), m * f.values());
}

inline ScalarField apply(const GeneratorOperator& op, const ScalarField& f) {
  require_same_grid(op.grid, f.grid(), "apply");
  return apply(op.matrix, f);
}

inline ScalarField apply(const AdjointOperator& op, const ScalarField& f) {
  require_same_grid(op.grid, f.grid(), "apply");
  return apply(op.matrix, f);
}

/// <f, g>_rho = sum_i w f_i g_i rho_i.
inline double weighted_inner(const ScalarField& f, const ScalarField& g, const ScalarField& rho) {
  require_same_grid(f.grid(), g.grid(), "weighted_inner");
  require_same_grid(f.grid(), rho.grid(), "weighted_inner");
  return f.grid().cell_volume() * (f.values().array() * g.values().array() * rho.values().array()).sum();
}

inline double weighted_norm(const ScalarField& f, const ScalarField& rho) { return std::sqrt(weighted_inner(f, f, rho)); }

/// max |D(rho) G - (D(rho) G)^T|.
inline double detailed_balance_defect(const GeneratorOperator& op) {
  const Eigen::VectorXd& rho = op.weight.values();
  const SparseMatrix flux = rho.asDiagonal() * op.matrix;
  const SparseMatrix diff = flux - SparseMatrix(flux.transpose());
  double m = 0.0;
  for (Eigen::Index k = 0; k < diff.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(diff, k); it; ++it) m = std::max(m, std::abs(it.value()));
  }
  return m;
}

/// Smallest off-diagonal entry (>= 0 for a monotone scheme).
inline double min_off_diagonal(const SparseMatrix& m) {
  double lo = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < m.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
      if (it.row() != it.col()) lo = std::min(lo, it.value());
    }
  }
  return lo;
}

// ---------------------------------------------------------------------------
// Operator dump: "row col value" triplets plus a JSON-ish sidecar record.
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string potential_hash(const ScalarField& potential) {
  const Eigen::VectorXd& v = potential.values();
  return hex64(fnv1a(v.data(), static_cast<std::size_t>(v.size()) * sizeof(double)));
}

inline void write_coordinate_matrix(const SparseMatrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  char buf[96];
  out << "row,col,value\n";
  for (Eigen::Index k = 0; k < m.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
      std::snprintf(buf, sizeof buf, "%lld,%lld,%.17g\n", static_cast<long long>(it.row()),
                    static_cast<long long>(it.col()), it.value());
      out << buf;
    }
  }
}

}  // namespace densctl
