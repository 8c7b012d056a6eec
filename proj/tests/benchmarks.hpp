#pragma once

// Benchmark problems shared by the unit tests and the acceptance runner.

#include <cmath>
#include <string>
#include <vector>

#include "densctl/densctl.hpp"

namespace bench {

using namespace densctl;

inline ExpressionMatrix scalar_matrix(const std::string& e) { return ExpressionMatrix{1, 1, {parse_expression(e)}}; }

inline ProblemSpec spec_1d(const std::string& phi, const std::string& sigma2, double lo = -6.0, double hi = 6.0,
                           int nodes = 401) {
  ProblemSpec s;
  s.grid = Grid({Axis{lo, hi, nodes}});
  s.phi = parse_expression(phi);
  s.diffusion = scalar_matrix(sigma2);
  return s;
}

/// Sigma = 2, phi = x^2 on [-6, 6].
inline ProblemSpec ou(int nodes = 401) { return spec_1d("x1^2", "2", -6.0, 6.0, nodes); }

/// Sigma = 1 + x^2, phi = x^2 on [-6, 6].
inline ProblemSpec multiplicative(int nodes = 401) { return spec_1d("x1^2", "1 + x1^2", -6.0, 6.0, nodes); }

/// Double well in x1, Gaussian in x2, Sigma = diag(1 + x2^2/2, 2).
inline ProblemSpec double_well_2d(int n1 = 41, int n2 = 41) {
  ProblemSpec s;
  s.grid = Grid({Axis{-2.5, 2.5, n1}, Axis{-4.5, 4.5, n2}});
  s.phi = parse_expression("(x1^2 - 1)^2 + x2^2");
  s.diffusion = ExpressionMatrix{2, 2,
                                 {parse_expression("1 + 0.5*x2^2"), parse_expression("0"), parse_expression("0"),
                                  parse_expression("2")}};
  return s;
}

struct Named {
  std::string name;
  ProblemSpec spec;
};

inline std::vector<Named> all() {
  return {{"ou", ou()}, {"multiplicative", multiplicative()}, {"double_well_2d", double_well_2d()}};
}

inline GeneratorOperator generator(const ProblemSpec& s) {
  return assemble_generator(diffusion_field(s), potential_field(s), s.grid);
}

inline ScalarField field(const std::string& e, const Grid& g) { return eval_scalar_field(parse_expression(e), g); }

/// max over the central `fraction` of the box, boundary layer excluded.
template <class F>
double interior_max(const Grid& g, F&& f, double fraction = 0.5) {
  double m = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.shell(i) < 1 || !g.in_interior(i, fraction)) continue;
    m = std::max(m, std::abs(f(i)));
  }
  return m;
}

}  // namespace bench
