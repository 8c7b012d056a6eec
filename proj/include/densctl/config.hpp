#pragma once

// JSON run configurations.
//
//   {
//     "mode": "forward",                        // optional, inferred from cost/target
//     "grid": {"lower": [-6], "upper": [6], "nodes": [401]},
//     "dynamics": {"phi": "x1^2", "Sigma": [["2"]]},   // or "sigma": n x m
//     "cost": {"q": "6*x1^2"},                  // forward mode
//     "target": {"p_inf": "exp(-2*x1^2)"},      // inverse mode; or "p_inf_csv": path
//     "solver": {...}, "sampling": {...}, "output": {"dir": "runs"}
//   }
//
// Scalars are accepted wherever a one-element list is expected, and a bare
// string for a 1 x 1 matrix. Grid bounds may be omitted, in which case a
// symmetric box is grown from phi.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "densctl/error.hpp"
#include "densctl/expression.hpp"
#include "densctl/grid.hpp"
#include "densctl/model.hpp"
#include "densctl/operators.hpp"

namespace densctl {

using Json = nlohmann::json;

struct SolverSettings {
  int k = 0;                      // 0: min(32, N/4)
  double dt = 0.0;                // 0: 0.1 / |xi_1|
  double horizon = 0.0;           // 0: 5 / |xi_1|
  int a2_shells = 5;
  double interior_fraction = 0.5;
  std::string perturbation = "mode:1";
  int dump_every = 0;
  int dense_limit = 4000;
};

struct SamplingSettings {
  std::uint64_t seed = 0;
  double dt = 1e-3;
  double horizon = 5.0;
  std::size_t paths = 10000;
  int threads = 1;
  std::vector<std::vector<double>> points;  // query points for desirability
  std::vector<double> x0;                   // start for paths / cost
  std::size_t particles = 100000;           // feedback ensemble
  std::optional<double> c;                  // cost constant for desirability; solved if absent
  int record_every = 0;
  int bootstrap = 200;
  std::string drift = "uncontrolled";  // paths: uncontrolled | steady_control | density_feedback
};

struct RunConfig {
  ProblemSpec spec;
  SolverSettings solver;
  SamplingSettings sampling;
  std::string output_dir = "runs";
  std::string source;  // raw bytes
  std::string source_path;

  std::string hash() const { return hex64(fnv1a(source.data(), source.size())); }
};

namespace detail {

inline std::string json_context(const std::string& key) { return "config key '" + key + "'"; }

inline std::vector<double> number_list(const Json& j, const std::string& key) {
  std::vector<double> out;
  if (j.is_number()) {
    out.push_back(j.get<double>());
  } else if (j.is_array()) {
    for (const Json& v : j) {
      if (!v.is_number()) throw InputError(json_context(key) + " must hold numbers");
      out.push_back(v.get<double>());
    }
  } else {
    throw InputError(json_context(key) + " must be a number or a list of numbers");
  }
  return out;
}

inline Expression expression_at(const Json& j, const std::string& key) {
  if (j.is_number()) return parse_expression(j.dump());
  if (!j.is_string()) throw InputError(json_context(key) + " must be an expression string");
  try {
    return parse_expression(j.get<std::string>());
  } catch (const ParseError& e) {
    throw InputError(json_context(key) + ": " + e.what());
  }
}

inline ExpressionMatrix expression_matrix(const Json& j, const std::string& key) {
  ExpressionMatrix m;
  if (j.is_string() || j.is_number()) {
    m.rows = m.cols = 1;
    m.entries.push_back(expression_at(j, key));
    return m;
  }
  if (!j.is_array() || j.empty()) throw InputError(json_context(key) + " must be a non-empty matrix of expressions");
  m.rows = static_cast<int>(j.size());
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Json& row = j[r];
    if (!row.is_array()) throw InputError(json_context(key) + " rows must be lists");
    if (r == 0) m.cols = static_cast<int>(row.size());
    if (static_cast<int>(row.size()) != m.cols || m.cols == 0) throw ShapeError(json_context(key) + " is ragged");
    for (std::size_t c = 0; c < row.size(); ++c) {
      m.entries.push_back(expression_at(row[c], key + "[" + std::to_string(r) + "][" + std::to_string(c) + "]"));
    }
  }
  return m;
}

template <class T>
T value_or(const Json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const Json::exception&) {
    throw InputError(json_context(key) + " has the wrong type");
  }
}

/// Two-column (x1..xn, p) CSV with a header row, nodes in grid order.
inline ScalarField read_target_csv(const std::filesystem::path& path, const Grid& g) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open target table " + path.string());
  std::string line;
  std::getline(in, line);
  Eigen::VectorXd v(static_cast<Eigen::Index>(g.size()));
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (row >= g.size()) throw ShapeError("target table has more rows than grid nodes");
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> cells;
    while (std::getline(ss, cell, ',')) {
      try {
        cells.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ParseError("target table row " + std::to_string(row + 2) + ": not a number", 0);
      }
    }
    if (static_cast<int>(cells.size()) != g.dim() + 1) {
      throw ShapeError("target table row " + std::to_string(row + 2) + " needs " + std::to_string(g.dim() + 1) +
                       " columns");
    }
    for (int k = 0; k < g.dim(); ++k) {
      if (std::abs(cells[static_cast<std::size_t>(k)] - g.coordinate(row, k)) > 1e-9 * (1.0 + std::abs(g.coordinate(row, k)))) {
        throw ShapeError("target table row " + std::to_string(row + 2) + " does not sit on " + g.describe_node(row));
      }
    }
    v[static_cast<Eigen::Index>(row)] = cells.back();
    ++row;
  }
  if (row != g.size()) throw ShapeError("target table has " + std::to_string(row) + " rows, grid has " + std::to_string(g.size()));
  return ScalarField(g, std::move(v));
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text, const std::filesystem::path& base = {}) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), e.byte);
  }
  if (!j.is_object()) throw InputError("config must be a JSON object");

  RunConfig cfg;
  cfg.source = text;
  ProblemSpec& s = cfg.spec;

  if (!j.contains("dynamics")) throw InputError("config needs a 'dynamics' section");
  const Json& dyn = j.at("dynamics");
  if (!dyn.contains("phi")) throw InputError("dynamics need a potential 'phi'");
  s.phi = detail::expression_at(dyn.at("phi"), "dynamics.phi");
  if (dyn.contains("Sigma")) s.diffusion = detail::expression_matrix(dyn.at("Sigma"), "dynamics.Sigma");
  if (dyn.contains("sigma")) s.sigma = detail::expression_matrix(dyn.at("sigma"), "dynamics.sigma");
  if (s.diffusion && s.sigma) throw InputError("give either dynamics.sigma or dynamics.Sigma, not both");
  if (!s.diffusion && !s.sigma) throw InputError("dynamics need 'sigma' or 'Sigma'");
  s.lambda = detail::value_or(dyn, "lambda", 2.0);
  s.eps_spd = detail::value_or(dyn, "eps_spd", 1e-8);
  if (dyn.contains("boundary") && dyn.at("boundary") != "zero_flux") {
    throw InputError("only the zero_flux boundary is supported");
  }

  if (!j.contains("grid")) throw InputError("config needs a 'grid' section");
  const Json& gj = j.at("grid");
  if (!gj.contains("nodes")) throw InputError("grid needs 'nodes'");
  std::vector<int> nodes;
  for (double n : detail::number_list(gj.at("nodes"), "grid.nodes")) {
    if (n != std::floor(n) || n < 3) throw InputError("grid.nodes must be integers >= 3");
    nodes.push_back(static_cast<int>(n));
  }
  const int dim = static_cast<int>(nodes.size());
  if (dim < 1 || dim > kMaxDim) throw InputError("grid must have 1 to 3 axes");
  if (gj.contains("lower") != gj.contains("upper")) throw InputError("grid needs both 'lower' and 'upper' or neither");
  if (gj.contains("lower")) {
    const std::vector<double> lo = detail::number_list(gj.at("lower"), "grid.lower");
    const std::vector<double> hi = detail::number_list(gj.at("upper"), "grid.upper");
    if (static_cast<int>(lo.size()) != dim || static_cast<int>(hi.size()) != dim) {
      throw ShapeError("grid.lower, grid.upper and grid.nodes must have equal length");
    }
    std::vector<Axis> axes;
    for (int k = 0; k < dim; ++k) axes.push_back(Axis{lo[static_cast<std::size_t>(k)], hi[static_cast<std::size_t>(k)], nodes[static_cast<std::size_t>(k)]});
    s.grid = Grid(std::move(axes));
  } else {
    s.grid = Grid(auto_box(s.phi, dim, nodes, detail::value_or(gj, "rel_mass", 1e-8)));
  }

  if (j.contains("cost")) {
    const Json& c = j.at("cost");
    if (!c.contains("q")) throw InputError("cost section needs 'q'");
    s.cost = detail::expression_at(c.at("q"), "cost.q");
  }
  if (j.contains("target")) {
    const Json& t = j.at("target");
    if (t.contains("p_inf")) {
      s.target = detail::expression_at(t.at("p_inf"), "target.p_inf");
    } else if (t.contains("p_inf_csv")) {
      std::filesystem::path p = t.at("p_inf_csv").get<std::string>();
      if (p.is_relative() && !base.empty()) p = base / p;
      s.target_table = detail::read_target_csv(p, s.grid);
    } else {
      throw InputError("target section needs 'p_inf' or 'p_inf_csv'");
    }
  }
  if (j.contains("mode")) {
    const std::string m = j.at("mode").get<std::string>();
    if (m == "forward") {
      s.mode = Mode::forward;
    } else if (m == "inverse") {
      s.mode = Mode::inverse;
    } else {
      throw InputError("mode must be 'forward' or 'inverse'");
    }
  } else {
    s.mode = j.contains("target") && !j.contains("cost") ? Mode::inverse : Mode::forward;
  }

  if (j.contains("solver")) {
    const Json& o = j.at("solver");
    SolverSettings& v = cfg.solver;
    v.k = detail::value_or(o, "k", v.k);
    v.dt = detail::value_or(o, "dt", v.dt);
    v.horizon = detail::value_or(o, "T", v.horizon);
    v.a2_shells = detail::value_or(o, "a2_shells", v.a2_shells);
    v.interior_fraction = detail::value_or(o, "interior_fraction", v.interior_fraction);
    v.perturbation = detail::value_or(o, "perturbation", v.perturbation);
    v.dump_every = detail::value_or(o, "dump_every", v.dump_every);
    v.dense_limit = detail::value_or(o, "dense_limit", v.dense_limit);
  }
  if (j.contains("sampling")) {
    const Json& o = j.at("sampling");
    SamplingSettings& v = cfg.sampling;
    v.seed = detail::value_or(o, "seed", v.seed);
    v.dt = detail::value_or(o, "dt", v.dt);
    v.horizon = detail::value_or(o, "T", v.horizon);
    v.paths = detail::value_or(o, "paths", v.paths);
    v.threads = detail::value_or(o, "threads", v.threads);
    v.particles = detail::value_or(o, "particles", v.particles);
    v.record_every = detail::value_or(o, "record_every", v.record_every);
    v.bootstrap = detail::value_or(o, "bootstrap", v.bootstrap);
    v.drift = detail::value_or(o, "drift", v.drift);
    if (o.contains("c")) v.c = detail::value_or(o, "c", 0.0);
    if (o.contains("x0")) v.x0 = detail::number_list(o.at("x0"), "sampling.x0");
    if (o.contains("points")) {
      for (const Json& p : o.at("points")) v.points.push_back(detail::number_list(p, "sampling.points"));
    }
  }
  if (j.contains("output")) cfg.output_dir = detail::value_or(j.at("output"), "dir", cfg.output_dir);
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  RunConfig cfg = parse_config(ss.str(), path.parent_path());
  cfg.source_path = path.string();
  return cfg;
}

}  // namespace densctl
