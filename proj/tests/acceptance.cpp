// Acceptance runner: one PASS/FAIL line per criterion, exit 1 if any fails.
// Usage: acceptance [criterion numbers...]

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "benchmarks.hpp"

namespace fs = std::filesystem;
using namespace densctl;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [x]");
  }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ScalarField normalised(const std::string& e, const Grid& g) {
  const ScalarField f = bench::field(e, g);
  return ScalarField(g, f.values() / f.integral());
}

/// Interior sup |u - (-2x)| for the q = 6x^2 OU problem at the given resolution.
double ou_control_error(int nodes) {
  ProblemSpec s = bench::ou(nodes);
  const HJBSolution sol = solve_hjb_principal(diffusion_field(s), potential_field(s), bench::field("6*x1^2", s.grid));
  return bench::interior_max(s.grid, [&](std::size_t i) { return sol.control(i, 0) + 2.0 * s.grid.coordinate(i, 0); });
}

int run_cli(const std::string& args) {
  const std::string cmd = "\"" + std::string(DENSCTL_CLI) + "\" --quiet " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string config(const std::string& name) {
  return "--config \"" + (fs::path(DENSCTL_CONFIGS) / (name + ".json")).string() + "\"";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---------------------------------------------------------------------------

Outcome stationarity() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const ProblemSpec s = bench::ou(401);
  const TensorField sigma = diffusion_field(s);
  const HJBSolution sol = solve_hjb_principal(sigma, potential_field(s), bench::field("6*x1^2", s.grid));
  const AdjointOperator a = adjoint_of(controlled_generator(sol, sigma));
  const double res = apply(a, sol.density).values().cwiseAbs().maxCoeff();
  const double t = seconds_since(t0);
  o.require(res <= 1e-10, "max|A p_inf| = " + num(res));
  o.require(t < 1.0, "runtime " + num(t) + " s");
  return o;
}

Outcome detailed_balance() {
  Outcome o;
  for (const bench::Named& b : bench::all()) {
    const double d = detailed_balance_defect(bench::generator(b.spec));
    o.require(d <= 1e-10, b.name + " " + num(d));
  }
  return o;
}

Outcome spectrum_oracle() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const ProblemSpec s = bench::ou(401);
  SpectralOptions dense;
  dense.dense_limit = 1000;
  const auto check = [&](const std::string& phi, int k, double step, const std::string& label) {
    const Spectrum sp = eig_generator(assemble_generator(diffusion_field(s), bench::field(phi, s.grid), s.grid), k, dense);
    double worst = std::abs(sp.eigenvalue(0));
    for (int n = 1; n < k; ++n) worst = std::max(worst, std::abs(sp.eigenvalue(n) + step * n) / (step * n));
    o.require(std::abs(sp.eigenvalue(0)) <= 1e-8 && worst <= 1e-2, label + " worst rel " + num(worst));
  };
  check("2*x1^2", 4, 4.0, "controlled {0,-4,-8,-12}");
  check("x1^2", 5, 2.0, "uncontrolled {0,-2,...,-8}");
  const double t = seconds_since(t0);
  o.require(t < 5.0, "runtime " + num(t) + " s");
  return o;
}

Outcome decay() {
  Outcome o;
  for (const bench::Named& b : bench::all()) {
    const GeneratorOperator g = bench::generator(b.spec);
    const Spectrum sp = eig_generator(g, 3);
    const double xi1 = sp.eigenvalue(1);
    const double horizon = 5.0 / std::abs(xi1);
    const ScalarField p0 = sp.mode(1);
    EvolveOptions opt;
    opt.store_every = 10;
    const DensityTrajectory tr = evolve_perturbation(g, p0, 1e-2 / std::abs(xi1), horizon, opt);
    const double rate = fit_decay_rate(tr.times, tr.norm, 0.0, horizon);
    const PerturbationCoefficients c = expand_in_eigenbasis(p0, sp);
    const double n0 = weighted_norm(p0, g.weight);
    double worst = 0.0;
    for (std::size_t j = 0; j < tr.snapshots.size(); ++j) {
      const ScalarField diff(b.spec.grid, tr.snapshots[j].values() - eigen_evolution(c, sp, tr.snapshot_times[j]).values());
      worst = std::max(worst, weighted_norm(diff, g.weight) / n0);
    }
    o.require(std::abs(rate / xi1 - 1.0) <= 2e-2, b.name + " rate/xi1 - 1 = " + num(rate / xi1 - 1.0));
    o.require(worst <= 1e-3, b.name + " PDE vs modal " + num(worst));
  }
  return o;
}

Outcome mass() {
  Outcome o;
  for (const bench::Named& b : bench::all()) {
    const ScalarField start = bench::field("exp(-4*(x1-0.5)^2)", b.spec.grid);
    const ScalarField p0(b.spec.grid, start.values() / start.integral());
    EvolveOptions opt;
    opt.store_every = 0;
    const DensityTrajectory tr = evolve_fp(adjoint_of(bench::generator(b.spec)), p0, 1e-3, 10.0, opt);
    double drift = 0.0;
    for (double m : tr.mass) drift = std::max(drift, std::abs(m - 1.0));
    o.require(tr.times.size() == 10001 && drift <= 1e-10,
              b.name + " " + std::to_string(tr.times.size() - 1) + " steps, drift " + num(drift));
  }
  return o;
}

Outcome hjb_gauge() {
  Outcome o;
  const ProblemSpec s = bench::ou(401);
  const HJBSolution zero = solve_hjb_principal(diffusion_field(s), potential_field(s), ScalarField::constant(s.grid, 0.0));
  const double spread = (zero.desirability.max() - zero.desirability.min()) / zero.desirability.max();
  o.require(std::abs(zero.cost) <= 1e-10, "q=0: |c| = " + num(std::abs(zero.cost)));
  o.require(spread <= 1e-10, "Psi spread " + num(spread));
  o.require(zero.control.values().cwiseAbs().maxCoeff() <= 1e-10,
            "|u| = " + num(zero.control.values().cwiseAbs().maxCoeff()));

  const HJBSolution six = solve_hjb_principal(diffusion_field(s), potential_field(s), bench::field("6*x1^2", s.grid));
  o.require(std::abs(six.cost - 2.0) <= 1e-3, "q=6x^2: c = " + num(six.cost));
  const double coarse = ou_control_error(201), fine = ou_control_error(401);
  const double order = std::log2(coarse / fine);
  o.require(order >= 1.8, "interior |u+2x| " + num(coarse) + " -> " + num(fine) + " under h/2, order " + num(order));
  return o;
}

Outcome inverse_round_trip() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const ProblemSpec s = bench::ou(401);
  const ScalarField target = normalised("exp(-2*x1^2)", s.grid);
  const InverseSolution inv = solve_inverse(target, diffusion_field(s), potential_field(s));
  double q_ref = 0.0;
  const double q_err = bench::interior_max(s.grid, [&](std::size_t i) {
    const double x = s.grid.coordinate(i, 0);
    q_ref = std::max(q_ref, 6 * x * x);
    return inv.cost[i] - 6 * x * x;
  });
  o.require(q_err / q_ref <= 1e-2, "q vs 6x^2 " + num(q_err / q_ref));
  const double u_err = bench::interior_max(s.grid, [&](std::size_t i) { return inv.control(i, 0) + 2 * s.grid.coordinate(i, 0); });
  o.require(u_err <= 1e-8, "u vs -2x " + num(u_err));
  const RoundTripReport g = roundtrip_verify(target, s);
  o.require(g.density_error <= 1e-3, "density " + num(g.density_error));

  const ProblemSpec sb = bench::spec_1d("x1^2", "2", -2.75, 2.75, 401);
  const RoundTripReport b = roundtrip_verify(normalised("exp(-(x1^2-1)^2)", sb.grid), sb);
  o.require(b.density_error <= 1e-2 && b.controlled_gap > 0.0,
            "bimodal density " + num(b.density_error) + ", gap " + num(b.controlled_gap));
  const double t = seconds_since(t0);
  o.require(t < 10.0, "runtime " + num(t) + " s");
  return o;
}

Outcome path_integral() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const RunConfig cfg = load_config(fs::path(DENSCTL_CONFIGS) / "ou_benchmark.json");
  const ProblemSpec& s = cfg.spec;
  SdeConfig sc;
  sc.dt = cfg.sampling.dt;
  sc.horizon = cfg.sampling.horizon;
  sc.seed = cfg.sampling.seed;
  sc.paths = cfg.sampling.paths;
  sc.threads = 1;
  o.require(sc.paths == 10000 && sc.horizon == 5.0 && sc.dt == 1e-3 && cfg.sampling.points.size() == 5,
            "N = " + std::to_string(sc.paths) + ", T = " + num(sc.horizon) + ", dt = " + num(sc.dt));

  const ScalarField q = cost_field(s);
  const HJBSolution sol = solve_hjb_principal(diffusion_field(s), potential_field(s), q);
  const SdeModel passive = uncontrolled_model(s);
  std::vector<SmallVector> pts;
  std::size_t ref = 0;
  for (const std::vector<double>& p : cfg.sampling.points) {
    pts.push_back(SmallVector::Constant(1, p[0]));
    if (std::abs(p[0]) < std::abs(pts[ref][0])) ref = pts.size() - 1;
  }
  const std::vector<PointEstimate> est = path_integral_desirability(passive, q, sol.cost, s.lambda, pts, sc);
  const auto grid_psi = [&](const SmallVector& x) { return passive.interpolate(sol.desirability.values(), x.data()); };
  double worst = 0.0;
  for (const PointEstimate& e : est) {
    const PointEstimate& e0 = est[ref];
    const double ratio = e.mean / e0.mean;
    const double se = std::abs(ratio) * std::hypot(e.stderr_ / e.mean, e0.stderr_ / e0.mean);
    const double dev = std::abs(ratio - grid_psi(e.point) / grid_psi(e0.point));
    if (se > 0.0) worst = std::max(worst, dev / se);
    else if (dev > 1e-12) worst = INFINITY;
  }
  o.require(worst <= 3.0, "worst ratio deviation " + num(worst) + " stderr");

  const CostEstimate c = estimate_c_mc(passive, q, s.lambda, sc, point_ensemble(pts[ref]), cfg.sampling.bootstrap);
  const double tol = std::max(3.0 * c.stderr_, 0.05 * std::abs(sol.cost));
  o.require(std::abs(c.cost - sol.cost) <= tol, "c_hat " + num(c.cost) + " vs " + num(sol.cost) + " (tol " + num(tol) + ")");
  const double t = seconds_since(t0);
  o.require(t < 60.0, "runtime " + num(t) + " s");
  return o;
}

Outcome ensemble() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const RunConfig cfg = load_config(fs::path(DENSCTL_CONFIGS) / "inverse_gaussian.json");
  const ProblemSpec& s = cfg.spec;
  SdeConfig sc;
  sc.dt = cfg.sampling.dt;
  sc.horizon = 10.0;
  sc.seed = cfg.sampling.seed;
  sc.threads = 1;
  const ScalarField target = target_field(s);
  const EnsembleTrajectory tr = simulate_density_feedback(density_feedback_model(s, target), sc,
                                                          uniform_ensemble(s.grid, 100000, sc.seed));
  const double tv = total_variation(histogram_density(tr.snapshots.back(), s.grid).density, target);
  o.require(tv <= 0.05, "TV at T = 10 with 1e5 particles " + num(tv));
  const double t = seconds_since(t0);
  o.require(t < 120.0, "runtime " + num(t) + " s");
  return o;
}

Outcome determinism() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "densctl_acceptance";
  for (const char* kind : {"paths", "desirability", "cost", "feedback"}) {
    std::string reference;
    for (int threads : {1, 2, 4}) {
      const fs::path dir = root / (std::string(kind) + std::to_string(threads));
      fs::remove_all(dir);
      const int code = run_cli(std::string("sample ") + kind + " --threads " + std::to_string(threads) + " " +
                               config("ou_sample_small") + " --out \"" + dir.string() + "\"");
      std::string bytes;
      for (const auto& run : fs::directory_iterator(dir)) {
        std::set<fs::path> csvs;
        for (const auto& e : fs::directory_iterator(run.path())) {
          if (e.path().extension() == ".csv") csvs.insert(e.path());
        }
        for (const fs::path& p : csvs) bytes += p.filename().string() + "\n" + slurp(p);
      }
      if (threads == 1) reference = bytes;
      o.require(code == 0 && !bytes.empty() && bytes == reference,
                std::string(kind) + " threads=" + std::to_string(threads));
    }
  }
  return o;
}

Outcome constraint_gates() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "densctl_acceptance" / "gates";
  fs::remove_all(root);
  const std::string out = " --out \"" + root.string() + "\"";
  o.require(run_cli("check " + config("bad_sigma") + out) == 1, "non-SPD Sigma exits 1");
  o.require(run_cli("check " + config("bad_cost") + out) == 1, "unbounded-below q exits 1");
  o.require(run_cli("check " + config("ou_q0") + out) == 0, "benchmark exits 0");
  const ProblemSpec s = bench::ou(401);
  o.require(!check_A2_proxy(ScalarField::constant(s.grid, 3.0)).pass, "A2 proxy FAIL for constant Phi");
  o.require(run_cli("check " + config("flat_target") + out) == 1, "flat target exits 1");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"stationarity of the controlled density", stationarity},
      {"detailed balance of D(rho)G", detailed_balance},
      {"OU spectrum oracle", spectrum_oracle},
      {"decay at the spectral gap", decay},
      {"mass conservation over 1e4 steps", mass},
      {"HJB gauge and OU control", hjb_gauge},
      {"inverse round trip", inverse_round_trip},
      {"path-integral cross-validation", path_integral},
      {"density-feedback ensemble", ensemble},
      {"sampling determinism across threads", determinism},
      {"constraint gates", constraint_gates},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t n = 0; n < criteria.size(); ++n) {
    const int id = static_cast<int>(n) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[n].second();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << id << " " << criteria[n].first << " (" << num(seconds_since(t0))
              << " s): " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
