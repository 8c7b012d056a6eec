#pragma once

// Largest eigenpairs of a sparse symmetric matrix. Dense LAPACK-style solve
// up to `dense_limit` rows; above that, block shift-invert subspace iteration
// with Rayleigh-Ritz extraction, iterated until every requested pair has
// residual |S x - theta x| <= tolerance * max(1, |S|_inf).

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "densctl/error.hpp"
#include "densctl/operators.hpp"

namespace densctl {

struct EigenOptions {
  int dense_limit = 4000;
  double tolerance = 1e-10;
  int max_iterations = 2000;
};

struct EigenPairs {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // unit Euclidean columns
  int iterations = 0;       // 0 for the dense path
};

namespace detail {

inline double inf_norm(const SparseMatrix& s) {
  double m = 0.0;
  for (Eigen::Index r = 0; r < s.outerSize(); ++r) {
    double row = 0.0;
    for (SparseMatrix::InnerIterator it(s, r); it; ++it) row += std::abs(it.value());
    m = std::max(m, row);
  }
  return m;
}

inline double gershgorin_upper(const SparseMatrix& s) {
  double m = -std::numeric_limits<double>::infinity();
  for (Eigen::Index r = 0; r < s.outerSize(); ++r) {
    double row = 0.0;
    for (SparseMatrix::InnerIterator it(s, r); it; ++it) row += it.col() == r ? it.value() : std::abs(it.value());
    m = std::max(m, row);
  }
  return m;
}

inline EigenPairs dense_largest(const SparseMatrix& s, int k) {
  const Eigen::MatrixXd dense(s);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense);
  if (es.info() != Eigen::Success) throw NumericalError("dense symmetric eigensolver failed");
  const Eigen::Index n = dense.rows();
  EigenPairs out;
  out.values.resize(k);
  out.vectors.resize(n, k);
  for (int i = 0; i < k; ++i) {
    out.values[i] = es.eigenvalues()[n - 1 - i];
    out.vectors.col(i) = es.eigenvectors().col(n - 1 - i);
  }
  return out;
}

inline EigenPairs subspace_largest(const SparseMatrix& s, int k, const EigenOptions& opt) {
  const Eigen::Index n = s.rows();
  const Eigen::Index p = std::min<Eigen::Index>(n, std::max<Eigen::Index>(2 * k, k + 8));
  const double upper = gershgorin_upper(s);
  const double shift = upper + 1e-2 * (1.0 + std::abs(upper));
  const double scale = std::max(1.0, inf_norm(s));

  Eigen::SparseMatrix<double> shifted(n, n);
  shifted.setIdentity();
  shifted *= shift;
  shifted -= Eigen::SparseMatrix<double>(s);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(shifted);
  if (ldlt.info() != Eigen::Success) throw NumericalError("shift-invert factorisation failed");

  std::mt19937_64 rng(0x5eed5eedULL);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) x(i, j) = normal(rng);
  }

  EigenPairs out;
  for (int iter = 1; iter <= opt.max_iterations; ++iter) {
    const Eigen::MatrixXd y = ldlt.solve(x);
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
    const Eigen::MatrixXd sq = s * q;
    Eigen::MatrixXd h = q.transpose() * sq;
    h = 0.5 * (h + h.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    // descending order
    Eigen::MatrixXd v = es.eigenvectors().rowwise().reverse();
    Eigen::VectorXd theta = es.eigenvalues().reverse();
    x = q * v;
    const Eigen::MatrixXd r = sq * v - x * theta.asDiagonal();
    double worst = 0.0;
    for (int i = 0; i < k; ++i) worst = std::max(worst, r.col(i).norm());
    if (worst <= opt.tolerance * scale) {
      out.values = theta.head(k);
      out.vectors = x.leftCols(k);
      out.iterations = iter;
      return out;
    }
  }
  throw NumericalError("subspace iteration did not converge");
}

}  // namespace detail

/// The `k` largest eigenpairs of symmetric `s`.
inline EigenPairs largest_eigenpairs(const SparseMatrix& s, int k, const EigenOptions& opt = {}) {
  if (k < 1 || k > s.rows()) {
    throw InputError("requested " + std::to_string(k) + " eigenpairs of a " + std::to_string(s.rows()) + "-row operator");
  }
  if (s.rows() <= opt.dense_limit) return detail::dense_largest(s, k);
  return detail::subspace_largest(s, k, opt);
}

}  // namespace densctl
