#pragma once

// Uniform tensor-product grids on a box in R^n (n <= 3) and the fields that
// live on them. Nodes are enumerated in row-major order (last axis fastest).
//
// Every node is the centre of a cell of volume prod(h_k); quadrature, the
// finite-volume generator and the particle histogram all use that cell
// decomposition, so integrals are sum_i w f_i with w = cell_volume().

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "densctl/error.hpp"

namespace densctl {

inline constexpr int kMaxDim = 3;

enum class Boundary { zero_flux };

using SmallVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

struct Axis {
  double lower = 0.0;
  double upper = 1.0;
  int nodes = 3;

  double spacing() const { return (upper - lower) / (nodes - 1); }
  double coordinate(int i) const { return i == nodes - 1 ? upper : lower + i * spacing(); }

  friend bool operator==(const Axis&, const Axis&) = default;
};

class Grid {
 public:
  Grid() = default;

  explicit Grid(std::vector<Axis> axes) : axes_(std::move(axes)) {
    if (axes_.empty() || axes_.size() > static_cast<std::size_t>(kMaxDim)) {
      throw InputError("grid dimension must be between 1 and 3, got " + std::to_string(axes_.size()));
    }
    size_ = 1;
    for (std::size_t k = 0; k < axes_.size(); ++k) {
      const Axis& a = axes_[k];
      if (a.nodes < 3) {
        throw InputError("grid axis " + std::to_string(k + 1) + " needs at least 3 nodes");
      }
      if (!(a.upper > a.lower) || !std::isfinite(a.lower) || !std::isfinite(a.upper)) {
        throw InputError("grid axis " + std::to_string(k + 1) + " has non-positive spacing");
      }
      size_ *= static_cast<std::size_t>(a.nodes);
    }
    std::size_t stride = 1;
    for (std::size_t k = axes_.size(); k-- > 0;) {
      strides_[k] = stride;
      stride *= static_cast<std::size_t>(axes_[k].nodes);
    }
  }

  /// Convenience constructor for a 1D grid.
  static Grid line(double lower, double upper, int nodes) { return Grid({Axis{lower, upper, nodes}}); }

  int dim() const { return static_cast<int>(axes_.size()); }
  std::size_t size() const { return size_; }
  const Axis& axis(int k) const { return axes_[static_cast<std::size_t>(k)]; }
  const std::vector<Axis>& axes() const { return axes_; }
  double spacing(int k) const { return axis(k).spacing(); }
  std::size_t stride(int k) const { return strides_[static_cast<std::size_t>(k)]; }

  double cell_volume() const {
    double v = 1.0;
    for (const Axis& a : axes_) v *= a.spacing();
    return v;
  }

  int index(std::size_t node, int k) const {
    return static_cast<int>((node / stride(k)) % static_cast<std::size_t>(axis(k).nodes));
  }

  std::array<int, kMaxDim> multi_index(std::size_t node) const {
    std::array<int, kMaxDim> idx{};
    for (int k = 0; k < dim(); ++k) idx[static_cast<std::size_t>(k)] = index(node, k);
    return idx;
  }

  double coordinate(std::size_t node, int k) const { return axis(k).coordinate(index(node, k)); }

  SmallVector point(std::size_t node) const {
    SmallVector x(dim());
    for (int k = 0; k < dim(); ++k) x[k] = coordinate(node, k);
    return x;
  }

  /// Index distance of a node to the box boundary (0 = boundary node).
  int shell(std::size_t node) const {
    int s = axis(0).nodes;
    for (int k = 0; k < dim(); ++k) {
      const int i = index(node, k);
      s = std::min({s, i, axis(k).nodes - 1 - i});
    }
    return s;
  }

  int shell_count() const {
    int s = axis(0).nodes;
    for (const Axis& a : axes_) s = std::min(s, (a.nodes + 1) / 2);
    return s;
  }

  /// Nodes whose coordinates lie in the central `fraction` of the box along every axis.
  bool in_interior(std::size_t node, double fraction) const {
    for (int k = 0; k < dim(); ++k) {
      const Axis& a = axis(k);
      const double centre = 0.5 * (a.lower + a.upper);
      const double half = 0.5 * (a.upper - a.lower);
      if (std::abs(coordinate(node, k) - centre) > fraction * half + 1e-12 * half) return false;
    }
    return true;
  }

  std::string describe_node(std::size_t node) const {
    std::ostringstream os;
    os.precision(6);
    os << "node " << node << " at (";
    for (int k = 0; k < dim(); ++k) os << (k ? ", " : "") << coordinate(node, k);
    os << ")";
    return os.str();
  }

  friend bool operator==(const Grid& a, const Grid& b) { return a.axes_ == b.axes_; }

 private:
  std::vector<Axis> axes_;
  std::array<std::size_t, kMaxDim> strides_{};
  std::size_t size_ = 0;
};

inline void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (!(a == b)) throw ShapeError(std::string(what) + ": fields live on different grids");
}

// ---------------------------------------------------------------------------
// Fields
// ---------------------------------------------------------------------------

class ScalarField {
 public:
  ScalarField() = default;

  ScalarField(Grid grid, Eigen::VectorXd values) : grid_(std::move(grid)), values_(std::move(values)) {
    if (static_cast<std::size_t>(values_.size()) != grid_.size()) {
      throw ShapeError("scalar field size does not match grid");
    }
    for (Eigen::Index i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) {
        throw DomainError("non-finite field value at " + grid_.describe_node(static_cast<std::size_t>(i)));
      }
    }
  }

  static ScalarField constant(const Grid& g, double v) {
    return ScalarField(g, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(g.size()), v));
  }

  const Grid& grid() const { return grid_; }
  const Eigen::VectorXd& values() const { return values_; }
  double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }
  std::size_t size() const { return grid_.size(); }

  double min() const { return values_.minCoeff(); }
  double max() const { return values_.maxCoeff(); }

  /// Quadrature integral with cell weights.
  double integral() const { return values_.sum() * grid_.cell_volume(); }

 private:
  Grid grid_;
  Eigen::VectorXd values_;
};

class VectorField {
 public:
  VectorField() = default;

  /// `values` is node-count x dim.
  VectorField(Grid grid, Eigen::MatrixXd values) : grid_(std::move(grid)), values_(std::move(values)) {
    if (static_cast<std::size_t>(values_.rows()) != grid_.size() || values_.cols() != grid_.dim()) {
      throw ShapeError("vector field shape does not match grid");
    }
    if (!values_.allFinite()) throw DomainError("non-finite vector field entry");
  }

  const Grid& grid() const { return grid_; }
  const Eigen::MatrixXd& values() const { return values_; }
  SmallVector at(std::size_t node) const { return values_.row(static_cast<Eigen::Index>(node)).transpose(); }
  double operator()(std::size_t node, int k) const { return values_(static_cast<Eigen::Index>(node), k); }
  std::size_t size() const { return grid_.size(); }

 private:
  Grid grid_;
  Eigen::MatrixXd values_;
};

struct SpdReport {
  double min_eigenvalue = 0.0;
  std::size_t worst_node = 0;
  double max_asymmetry = 0.0;
  std::size_t asymmetric_node = 0;
};

/// Symmetric n x n matrix per node (diffusion matrix, control cost).
class TensorField {
 public:
  TensorField() = default;

  TensorField(Grid grid, std::vector<SmallMatrix> values) : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_.size()) throw ShapeError("tensor field size does not match grid");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      const SmallMatrix& m = values_[i];
      if (m.rows() != grid_.dim() || m.cols() != grid_.dim()) throw ShapeError("tensor field entry has wrong shape");
      if (!m.allFinite()) throw DomainError("non-finite tensor entry at " + grid_.describe_node(i));
    }
  }

  static TensorField constant(const Grid& g, const SmallMatrix& m) {
    return TensorField(g, std::vector<SmallMatrix>(g.size(), m));
  }

  const Grid& grid() const { return grid_; }
  const SmallMatrix& operator[](std::size_t i) const { return values_[i]; }
  const std::vector<SmallMatrix>& values() const { return values_; }
  std::size_t size() const { return grid_.size(); }

  double component(std::size_t node, int r, int c) const { return values_[node](r, c); }

  SpdReport spd_report() const {
    SpdReport rep;
    rep.min_eigenvalue = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < values_.size(); ++i) {
      const SmallMatrix& m = values_[i];
      const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
      if (asym > rep.max_asymmetry) {
        rep.max_asymmetry = asym;
        rep.asymmetric_node = i;
      }
      Eigen::SelfAdjointEigenSolver<SmallMatrix> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
      const double lo = es.eigenvalues().minCoeff();
      if (lo < rep.min_eigenvalue) {
        rep.min_eigenvalue = lo;
        rep.worst_node = i;
      }
    }
    return rep;
  }

  /// Throws SpdError unless symmetric to 1e-12 and uniformly positive definite.
  void require_spd(double eps_spd = 1e-8) const {
    const SpdReport rep = spd_report();
    if (rep.max_asymmetry > 1e-12) {
      throw SpdError("diffusion matrix not symmetric at " + grid_.describe_node(rep.asymmetric_node));
    }
    if (!(rep.min_eigenvalue >= eps_spd)) {
      std::ostringstream os;
      os << "matrix not uniformly positive definite: smallest eigenvalue " << rep.min_eigenvalue << " at "
         << grid_.describe_node(rep.worst_node);
      throw SpdError(os.str());
    }
  }

 private:
  Grid grid_;
  std::vector<SmallMatrix> values_;
};

// ---------------------------------------------------------------------------
// Finite differences: second-order central in the interior, second-order
// one-sided at the boundary.
// ---------------------------------------------------------------------------

namespace fd {

inline Eigen::VectorXd derivative(const Grid& g, const Eigen::VectorXd& f, int k) {
  const std::size_t s = g.stride(k);
  const int n = g.axis(k).nodes;
  const double h = g.spacing(k);
  Eigen::VectorXd d(f.size());
  for (std::size_t node = 0; node < g.size(); ++node) {
    const int i = g.index(node, k);
    const auto at = [&](int j) { return f[static_cast<Eigen::Index>(node + (j - i) * static_cast<std::ptrdiff_t>(s))]; };
    double v;
    if (i == 0) {
      v = (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
    } else if (i == n - 1) {
      v = (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h);
    } else {
      v = (at(i + 1) - at(i - 1)) / (2.0 * h);
    }
    d[static_cast<Eigen::Index>(node)] = v;
  }
  return d;
}

inline Eigen::VectorXd second_derivative(const Grid& g, const Eigen::VectorXd& f, int k) {
  const std::size_t s = g.stride(k);
  const int n = g.axis(k).nodes;
  const double h2 = g.spacing(k) * g.spacing(k);
  Eigen::VectorXd d(f.size());
  for (std::size_t node = 0; node < g.size(); ++node) {
    const int i = g.index(node, k);
    const auto at = [&](int j) { return f[static_cast<Eigen::Index>(node + (j - i) * static_cast<std::ptrdiff_t>(s))]; };
    double v;
    if (n == 3) {
      v = (at(0) - 2.0 * at(1) + at(2)) / h2;
    } else if (i == 0) {
      v = (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / h2;
    } else if (i == n - 1) {
      v = (2.0 * at(n - 1) - 5.0 * at(n - 2) + 4.0 * at(n - 3) - at(n - 4)) / h2;
    } else {
      v = (at(i + 1) - 2.0 * at(i) + at(i - 1)) / h2;
    }
    d[static_cast<Eigen::Index>(node)] = v;
  }
  return d;
}

inline Eigen::VectorXd mixed_derivative(const Grid& g, const Eigen::VectorXd& f, int k, int l) {
  if (k == l) return second_derivative(g, f, k);
  return derivative(g, derivative(g, f, l), k);
}

inline VectorField gradient(const ScalarField& f) {
  const Grid& g = f.grid();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(g.size()), g.dim());
  for (int k = 0; k < g.dim(); ++k) out.col(k) = derivative(g, f.values(), k);
  return VectorField(g, std::move(out));
}

inline Eigen::VectorXd laplacian(const ScalarField& f) {
  const Grid& g = f.grid();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.size()));
  for (int k = 0; k < g.dim(); ++k) out += second_derivative(g, f.values(), k);
  return out;
}

/// Frobenius pairing sum_ij M_ij d_i d_j f.
inline Eigen::VectorXd hessian_contraction(const TensorField& m, const ScalarField& f) {
  const Grid& g = f.grid();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.size()));
  for (int k = 0; k < g.dim(); ++k) {
    for (int l = 0; l < g.dim(); ++l) {
      const Eigen::VectorXd d = mixed_derivative(g, f.values(), k, l);
      for (std::size_t i = 0; i < g.size(); ++i) out[static_cast<Eigen::Index>(i)] += m[i](k, l) * d[static_cast<Eigen::Index>(i)];
    }
  }
  return out;
}

/// Matrix divergence (div M)_i = sum_k d M_ik / d x_k.
inline VectorField divergence(const TensorField& m) {
  const Grid& g = m.grid();
  const auto n = static_cast<Eigen::Index>(g.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, g.dim());
  Eigen::VectorXd comp(n);
  for (int i = 0; i < g.dim(); ++i) {
    for (int k = 0; k < g.dim(); ++k) {
      for (Eigen::Index node = 0; node < n; ++node) comp[node] = m[static_cast<std::size_t>(node)](i, k);
      out.col(i) += derivative(g, comp, k);
    }
  }
  return VectorField(g, std::move(out));
}

}  // namespace fd

}  // namespace densctl
