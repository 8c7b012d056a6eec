#pragma once

// Problem definition for the long-time-average density control problem and
// the structural checks it must pass before anything is solved:
//   - drift of the form b = div(Sigma)/2 - Sigma grad(phi)/2,
//   - control cost tied to the noise, R^{-1} = Sigma/2,
//   - a confining generalized potential (checked by a boundary-shell proxy),
//   - Sigma uniformly positive definite and q bounded below.

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "densctl/error.hpp"
#include "densctl/expression.hpp"
#include "densctl/grid.hpp"

namespace densctl {

/// Row-major matrix of expressions (sigma is n x m, Sigma is n x n).
struct ExpressionMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<Expression> entries;

  const Expression& operator()(int r, int c) const { return entries[static_cast<std::size_t>(r * cols + c)]; }
};

enum class Mode { forward, inverse };

inline const char* mode_name(Mode m) { return m == Mode::forward ? "forward" : "inverse"; }

struct ProblemSpec {
  Grid grid;
  Expression phi;
  std::optional<ExpressionMatrix> sigma;      // volatility, n x m
  std::optional<ExpressionMatrix> diffusion;  // Sigma = sigma sigma^T, n x n
  std::optional<Expression> cost;             // q, forward mode
  std::optional<Expression> target;           // p_inf (unnormalised), inverse mode
  std::optional<ScalarField> target_table;    // tabulated p_inf, inverse mode
  double lambda = 2.0;
  Boundary boundary = Boundary::zero_flux;
  double eps_spd = 1e-8;
  Mode mode = Mode::forward;
};

// ---------------------------------------------------------------------------
// Field evaluation
// ---------------------------------------------------------------------------

inline ScalarField eval_scalar_field(const Expression& e, const Grid& g) {
  if (e.arity() > g.dim()) {
    throw InputError("expression '" + e.to_string() + "' uses x" + std::to_string(e.arity()) + " on a " +
                     std::to_string(g.dim()) + "D grid");
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(g.size()));
  double x[kMaxDim] = {0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (int k = 0; k < g.dim(); ++k) x[k] = g.coordinate(i, k);
    const double y = e.evaluate(std::span<const double>(x, static_cast<std::size_t>(g.dim())));
    if (!std::isfinite(y)) {
      throw DomainError("expression '" + e.to_string() + "' is not finite at " + g.describe_node(i));
    }
    v[static_cast<Eigen::Index>(i)] = y;
  }
  return ScalarField(g, std::move(v));
}

inline std::vector<Eigen::MatrixXd> eval_matrix(const ExpressionMatrix& m, const Grid& g) {
  std::vector<ScalarField> comps;
  comps.reserve(m.entries.size());
  for (const Expression& e : m.entries) comps.push_back(eval_scalar_field(e, g));
  std::vector<Eigen::MatrixXd> out(g.size(), Eigen::MatrixXd(m.rows, m.cols));
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (int r = 0; r < m.rows; ++r) {
      for (int c = 0; c < m.cols; ++c) out[i](r, c) = comps[static_cast<std::size_t>(r * m.cols + c)][i];
    }
  }
  return out;
}

/// Sigma on the grid, either given directly or formed as sigma sigma^T.
inline TensorField diffusion_field(const ProblemSpec& s) {
  const int n = s.grid.dim();
  if (s.diffusion) {
    if (s.diffusion->rows != n || s.diffusion->cols != n) throw ShapeError("Sigma must be n x n");
    std::vector<SmallMatrix> out;
    for (const Eigen::MatrixXd& m : eval_matrix(*s.diffusion, s.grid)) out.emplace_back(m);
    return TensorField(s.grid, std::move(out));
  }
  if (s.sigma) {
    if (s.sigma->rows != n) throw ShapeError("sigma must have n rows");
    const std::vector<Eigen::MatrixXd> sig = eval_matrix(*s.sigma, s.grid);
    std::vector<SmallMatrix> out;
    out.reserve(sig.size());
    for (const Eigen::MatrixXd& m : sig) out.emplace_back(m * m.transpose());
    return TensorField(s.grid, std::move(out));
  }
  throw InputError("dynamics need either sigma or Sigma");
}

/// Volatility sigma (n x m) per node; the lower Cholesky factor when only Sigma is given.
inline std::vector<Eigen::MatrixXd> volatility_field(const ProblemSpec& s) {
  if (s.sigma) return eval_matrix(*s.sigma, s.grid);
  const TensorField sig = diffusion_field(s);
  std::vector<Eigen::MatrixXd> out;
  out.reserve(sig.size());
  for (std::size_t i = 0; i < sig.size(); ++i) {
    Eigen::LLT<SmallMatrix> llt(sig[i]);
    if (llt.info() != Eigen::Success) throw SpdError("Sigma has no Cholesky factor at " + s.grid.describe_node(i));
    out.emplace_back(Eigen::MatrixXd(llt.matrixL()));
  }
  return out;
}

inline ScalarField potential_field(const ProblemSpec& s) { return eval_scalar_field(s.phi, s.grid); }

inline ScalarField cost_field(const ProblemSpec& s) {
  if (!s.cost) throw InputError("problem has no state cost q");
  return eval_scalar_field(*s.cost, s.grid);
}

/// Target density normalised to unit mass on the grid.
inline ScalarField target_field(const ProblemSpec& s) {
  ScalarField raw;
  if (s.target_table) {
    raw = *s.target_table;
  } else if (s.target) {
    raw = eval_scalar_field(*s.target, s.grid);
  } else {
    throw InputError("problem has no target density");
  }
  const double mass = raw.integral();
  if (!(mass > 0.0)) throw DomainError("target density has non-positive mass");
  return ScalarField(raw.grid(), raw.values() / mass);
}

// ---------------------------------------------------------------------------
// Drift and control cost
// ---------------------------------------------------------------------------

/// b = div(Sigma)/2 - Sigma grad(phi)/2.
inline VectorField drift_from_potential(const TensorField& sigma, const ScalarField& phi) {
  require_same_grid(sigma.grid(), phi.grid(), "drift_from_potential");
  const Grid& g = phi.grid();
  const VectorField div = fd::divergence(sigma);
  const VectorField grad = fd::gradient(phi);
  Eigen::MatrixXd b(static_cast<Eigen::Index>(g.size()), g.dim());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const SmallVector v = 0.5 * div.at(i) - 0.5 * sigma[i] * grad.at(i);
    b.row(static_cast<Eigen::Index>(i)) = v.transpose();
  }
  return VectorField(g, std::move(b));
}

/// R = 2 Sigma^{-1}, the control cost that makes R^{-1} = Sigma/2.
inline TensorField control_cost_from_A1(const TensorField& sigma, double eps_spd = 1e-8) {
  sigma.require_spd(eps_spd);
  std::vector<SmallMatrix> r;
  r.reserve(sigma.size());
  for (const SmallMatrix& m : sigma.values()) {
    SmallMatrix inv = 2.0 * m.inverse();
    r.emplace_back(0.5 * (inv + inv.transpose()));
  }
  return TensorField(sigma.grid(), std::move(r));
}

// ---------------------------------------------------------------------------
// Confinement proxy
// ---------------------------------------------------------------------------

struct ConstraintReport {
  bool pass = false;
  std::vector<double> shell_minima;  // index 0 = outermost shell
  std::string reason;
};

/// Minimum of `f` over each of the `shells` outermost boundary shells.
inline std::vector<double> shell_minima(const Grid& g, const Eigen::VectorXd& f, int shells) {
  std::vector<double> m(static_cast<std::size_t>(shells), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const int s = g.shell(i);
    if (s < shells) m[static_cast<std::size_t>(s)] = std::min(m[static_cast<std::size_t>(s)], f[static_cast<Eigen::Index>(i)]);
  }
  return m;
}

/// W = |grad Phi|^2 / 2 - Laplacian(Phi) must grow toward the boundary: the
/// shell minima of W over the outermost `shells` shells are strictly
/// increasing outward and positive on the outermost shell.
inline ConstraintReport check_A2_proxy(const ScalarField& potential, int shells = 5) {
  const Grid& g = potential.grid();
  if (shells < 2 || g.shell_count() < shells + 1) {
    throw InputError("grid too small for " + std::to_string(shells) + " confinement shells");
  }
  const VectorField grad = fd::gradient(potential);
  const Eigen::VectorXd lap = fd::laplacian(potential);
  Eigen::VectorXd w(static_cast<Eigen::Index>(g.size()));
  for (std::size_t i = 0; i < g.size(); ++i) {
    w[static_cast<Eigen::Index>(i)] = 0.5 * grad.at(i).squaredNorm() - lap[static_cast<Eigen::Index>(i)];
  }

  ConstraintReport rep;
  rep.shell_minima = shell_minima(g, w, shells);
  rep.pass = true;
  for (int s = 0; s + 1 < shells; ++s) {
    if (!(rep.shell_minima[static_cast<std::size_t>(s)] > rep.shell_minima[static_cast<std::size_t>(s + 1)])) {
      rep.pass = false;
      rep.reason = "confinement functional not increasing toward the boundary (shell " + std::to_string(s) + ")";
      break;
    }
  }
  if (rep.pass && !(rep.shell_minima[0] > 0.0)) {
    rep.pass = false;
    rep.reason = "confinement functional not positive on the boundary shell";
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

enum class Severity { pass, warn, fail };

inline const char* severity_name(Severity s) {
  switch (s) {
    case Severity::pass: return "PASS";
    case Severity::warn: return "WARN";
    case Severity::fail: return "FAIL";
  }
  return "?";
}

struct Finding {
  Severity severity;
  std::string check;
  std::string message;
};

struct ValidationReport {
  std::vector<Finding> findings;

  void add(Severity s, std::string check, std::string message) {
    findings.push_back({s, std::move(check), std::move(message)});
  }
  bool has(Severity s) const {
    for (const Finding& f : findings) {
      if (f.severity == s) return true;
    }
    return false;
  }
  /// No FAIL findings; warnings do not block.
  bool ok() const { return !has(Severity::fail); }
  bool all_pass() const { return !has(Severity::fail) && !has(Severity::warn); }
};

inline ValidationReport validate_spec(const ProblemSpec& s, int shells = 5) {
  ValidationReport rep;

  const bool has_cost = s.cost.has_value();
  const bool has_target = s.target.has_value() || s.target_table.has_value();
  if (s.lambda != 2.0) {
    rep.add(Severity::fail, "structure", "lambda must equal 2 so that R^{-1} = Sigma/2");
  }
  if (has_cost == has_target) {
    rep.add(Severity::fail, "structure", "exactly one of cost q or target p_inf must be given");
  } else if ((s.mode == Mode::forward) != has_cost) {
    rep.add(Severity::fail, "structure", std::string("mode '") + mode_name(s.mode) + "' does not match the given cost/target");
  } else {
    rep.add(Severity::pass, "structure", std::string(mode_name(s.mode)) + " problem");
  }

  std::optional<TensorField> sigma;
  try {
    sigma = diffusion_field(s);
  } catch (const Error& e) {
    rep.add(Severity::fail, "fields", std::string("Sigma: ") + e.what());
  }
  if (sigma) {
    const SpdReport spd = sigma->spd_report();
    std::ostringstream os;
    if (spd.max_asymmetry > 1e-12) {
      os << "Sigma asymmetric by " << spd.max_asymmetry << " at " << s.grid.describe_node(spd.asymmetric_node);
      rep.add(Severity::fail, "symmetry", os.str());
    } else {
      rep.add(Severity::pass, "symmetry", "Sigma symmetric");
    }
    os.str("");
    os << "smallest eigenvalue of Sigma " << spd.min_eigenvalue << " at " << s.grid.describe_node(spd.worst_node);
    if (spd.min_eigenvalue >= s.eps_spd) {
      rep.add(Severity::pass, "spd", os.str());
      rep.add(Severity::pass, "A1", "control cost R = 2 Sigma^{-1} by construction");
    } else {
      os << " below eps_spd " << s.eps_spd;
      rep.add(Severity::fail, "spd", os.str());
      rep.add(Severity::fail, "A1", "R = 2 Sigma^{-1} undefined where Sigma is singular");
    }
  }

  std::optional<ScalarField> phi;
  try {
    phi = potential_field(s);
  } catch (const Error& e) {
    rep.add(Severity::fail, "fields", std::string("phi: ") + e.what());
  }

  if (has_cost && s.mode == Mode::forward) {
    try {
      const ScalarField q = cost_field(s);
      const std::vector<double> m = shell_minima(s.grid, q.values(), std::min(shells, s.grid.shell_count()));
      double inner_min = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < q.size(); ++i) {
        if (s.grid.shell(i) > 0) inner_min = std::min(inner_min, q[i]);
      }
      bool decreasing = m.size() >= 2;
      for (std::size_t k = 0; k + 1 < m.size(); ++k) decreasing = decreasing && (m[k] < m[k + 1]);
      if (m[0] < inner_min) {
        rep.add(Severity::warn, "cost-lower-bound",
                "minimum of q attained on the boundary; boundedness below only verified on the truncated box");
      }
      if (decreasing) {
        rep.add(Severity::fail, "cost-lower-bound", "q decreases toward the boundary (unbounded below)");
      } else if (m[0] >= inner_min) {
        rep.add(Severity::pass, "cost-lower-bound", "q bounded below on the grid");
      }
    } catch (const Error& e) {
      rep.add(Severity::fail, "fields", std::string("q: ") + e.what());
    }
    if (phi) {
      try {
        const ConstraintReport a2 = check_A2_proxy(*phi, shells);
        if (a2.pass) {
          rep.add(Severity::pass, "A2", "uncontrolled potential confining");
        } else {
          rep.add(Severity::warn, "A2", "uncontrolled potential: " + a2.reason + "; recheck the controlled potential after solving");
        }
      } catch (const Error& e) {
        rep.add(Severity::fail, "A2", e.what());
      }
    }
  }

  if (has_target && s.mode == Mode::inverse) {
    try {
      const ScalarField p = target_field(s);
      if (!(p.min() > 0.0)) {
        rep.add(Severity::fail, "target", "target density not strictly positive on the grid");
      } else {
        rep.add(Severity::pass, "target", "target density positive");
        const ScalarField potential(p.grid(), -p.values().array().log().matrix());
        const ConstraintReport a2 = check_A2_proxy(potential, shells);
        rep.add(a2.pass ? Severity::pass : Severity::fail, "A2",
                a2.pass ? "target potential -log p_inf confining" : "target potential: " + a2.reason);
      }
    } catch (const Error& e) {
      rep.add(Severity::fail, "target", e.what());
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Domain truncation
// ---------------------------------------------------------------------------

/// Symmetric box [-L, L]^n grown until the Gibbs weight exp(-Phi) on the
/// boundary falls below `rel_mass` of its maximum.
inline std::vector<Axis> auto_box(const Expression& potential, int dim, const std::vector<int>& nodes,
                                  double rel_mass = 1e-8) {
  const double threshold = -std::log(rel_mass);
  double half = 1.0;
  for (int iter = 0; iter < 200; ++iter, half *= 1.1) {
    std::vector<Axis> probe(static_cast<std::size_t>(dim), Axis{-half, half, 41});
    const Grid g(probe);
    ScalarField f;
    try {
      f = eval_scalar_field(potential, g);
    } catch (const DomainError&) {
      continue;
    }
    const double interior_min = f.min();
    double boundary_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g.shell(i) == 0) boundary_min = std::min(boundary_min, f[i]);
    }
    if (boundary_min - interior_min >= threshold) {
      std::vector<Axis> axes;
      for (int k = 0; k < dim; ++k) axes.push_back(Axis{-half, half, nodes[static_cast<std::size_t>(k)]});
      return axes;
    }
  }
  throw InputError("could not find a box confining exp(-Phi); give grid bounds explicitly");
}

}  // namespace densctl
