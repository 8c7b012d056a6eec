// densctl: command-line front end.
//
// Exit codes: 0 success, 1 numerical or constraint failure, 2 usage/config error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "densctl/densctl.hpp"

namespace fs = std::filesystem;
using densctl::Json;

namespace {

fs::path g_run_dir;  // output directory of the command in flight, for error.json

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<int> k;
  bool quiet = false;

  bool controlled = false;
  std::string perturbation;
  std::optional<double> horizon;
  std::optional<int> dump_every;
  std::string sample_kind;
};

/// Everything a command needs: parsed config, its output directory and the manifest being built.
class Run {
 public:
  Run(const Options& opt, std::string command) : opt_(opt), command_(std::move(command)) {
    manifest_.started = densctl::utc_timestamp();
    manifest_.command = command_;
    manifest_.tool_version = densctl::kVersion;
    try {
      cfg_ = densctl::load_config(opt.config);
    } catch (const densctl::Error& e) {
      throw densctl::InputError(e.what());
    }
    manifest_.config_hash = cfg_.hash();
    if (opt.seed) cfg_.sampling.seed = *opt.seed;
    if (opt.threads) cfg_.sampling.threads = *opt.threads;
    manifest_.seed = cfg_.sampling.seed;
    const fs::path root = opt.out.empty() ? fs::path(cfg_.output_dir) : fs::path(opt.out);
    dir_ = root / (manifest_.config_hash.substr(0, 12) + "-" + command_);
    g_run_dir = dir_;
  }

  const densctl::RunConfig& config() const { return cfg_; }
  const densctl::ProblemSpec& spec() const { return cfg_.spec; }
  const Options& options() const { return opt_; }

  fs::path output(const std::string& name) {
    fs::create_directories(dir_);
    manifest_.outputs.push_back(name);
    return dir_ / name;
  }

  void json(const std::string& name, const Json& j) { densctl::write_json(output(name), j); }

  void say(const std::string& line) const {
    if (!opt_.quiet) std::cout << line << '\n';
  }

  void finish() {
    manifest_.finished = densctl::utc_timestamp();
    manifest_.outputs.push_back("manifest.json");
    fs::create_directories(dir_);
    densctl::write_json(dir_ / "manifest.json", manifest_.to_json());
    say("outputs in " + dir_.string());
  }

  int modes(std::size_t n) const {
    if (opt_.k) return *opt_.k;
    if (cfg_.solver.k > 0) return cfg_.solver.k;
    return static_cast<int>(std::max<std::size_t>(2, std::min<std::size_t>(32, n / 4)));
  }

  densctl::SpectralOptions spectral_options() const {
    densctl::SpectralOptions o;
    o.dense_limit = cfg_.solver.dense_limit;
    return o;
  }

 private:
  Options opt_;
  std::string command_;
  densctl::RunConfig cfg_;
  densctl::RunManifest manifest_;
  fs::path dir_;
};

std::string fmt(double v) { return densctl::format_double(v); }

Json report_json(const densctl::ValidationReport& rep) {
  Json arr = Json::array();
  for (const densctl::Finding& f : rep.findings) {
    arr.push_back({{"check", f.check}, {"severity", densctl::severity_name(f.severity)}, {"message", f.message}});
  }
  return {{"ok", rep.ok()}, {"all_pass", rep.all_pass()}, {"findings", arr}};
}

void print_report(const Run& run, const densctl::ValidationReport& rep) {
  for (const densctl::Finding& f : rep.findings) {
    run.say(std::string(densctl::severity_name(f.severity)) + " " + f.check + ": " + f.message);
  }
}

/// Fails with exit 1 (after writing the report) when the spec has FAIL findings.
bool gate(Run& run) {
  const densctl::ValidationReport rep = densctl::validate_spec(run.spec(), run.config().solver.a2_shells);
  if (rep.ok()) return true;
  print_report(run, rep);
  run.json("report.json", report_json(rep));
  run.finish();
  return false;
}

void require_mode(const Run& run, densctl::Mode m) {
  if (run.spec().mode != m) {
    throw densctl::InputError(std::string("command needs a ") + densctl::mode_name(m) + "-mode config, got " +
                              densctl::mode_name(run.spec().mode));
  }
}

Json vector_json(const Eigen::VectorXd& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

struct Fields {
  densctl::TensorField sigma;
  densctl::ScalarField phi;
};

Fields fields(const densctl::ProblemSpec& s) {
  Fields f{densctl::diffusion_field(s), densctl::potential_field(s)};
  f.sigma.require_spd(s.eps_spd);
  return f;
}

densctl::HJBSolution forward_solution(const Run& run, const Fields& f) {
  return densctl::solve_hjb_principal(f.sigma, f.phi, densctl::cost_field(run.spec()), run.spec().lambda,
                                      run.spectral_options());
}

/// Stationary solution in either mode: the HJB solve for forward configs, the
/// synthesised problem for inverse configs.
densctl::HJBSolution stationary_solution(const Run& run, const Fields& f) {
  if (run.spec().mode == densctl::Mode::forward) return forward_solution(run, f);
  const densctl::InverseSolution inv = densctl::solve_inverse(run.spec());
  return densctl::solve_hjb_principal(f.sigma, f.phi, inv.cost, run.spec().lambda, run.spectral_options());
}

void append_vector_columns(const densctl::VectorField& v, const std::string& name, std::vector<std::string>& names,
                           std::vector<Eigen::VectorXd>& store) {
  for (int k = 0; k < v.grid().dim(); ++k) {
    names.push_back(name + std::to_string(k + 1));
    store.push_back(v.values().col(k));
  }
}

void write_columns(const fs::path& path, const densctl::Grid& g, const std::vector<std::string>& names,
                   const std::vector<Eigen::VectorXd>& store) {
  std::vector<const Eigen::VectorXd*> cols;
  for (const Eigen::VectorXd& c : store) cols.push_back(&c);
  densctl::write_fields_csv(path, g, names, cols);
}

// ---------------------------------------------------------------------------

int cmd_check(const Options& opt) {
  Run run(opt, "check");
  const densctl::ValidationReport rep = densctl::validate_spec(run.spec(), run.config().solver.a2_shells);
  print_report(run, rep);
  run.json("report.json", report_json(rep));
  run.finish();
  return rep.ok() ? 0 : 1;
}

int cmd_solve(const Options& opt) {
  Run run(opt, "solve");
  require_mode(run, densctl::Mode::forward);
  if (!gate(run)) return 1;
  const Fields f = fields(run.spec());
  const densctl::ScalarField q = densctl::cost_field(run.spec());
  const densctl::HJBSolution sol = forward_solution(run, f);
  const densctl::Grid& g = sol.grid;

  const densctl::GeneratorOperator ctrl = densctl::controlled_generator(sol, f.sigma);
  const densctl::Spectrum cs = densctl::eig_generator(ctrl, std::min<int>(2, static_cast<int>(g.size())), run.spectral_options());
  const double hjb = densctl::verify_hjb_residual(sol, q, f.sigma, f.phi, densctl::control_cost_from_A1(f.sigma, run.spec().eps_spd),
                                                  run.config().solver.interior_fraction);
  const double stat = densctl::stationarity_residual(sol, f.sigma);
  Json summary = {{"c", sol.cost},
                  {"principal_eigenvalue", sol.principal_eigenvalue},
                  {"controlled_gap", densctl::spectral_gap(cs)},
                  {"hjb_residual_interior", hjb},
                  {"stationarity_residual", stat},
                  {"interior_fraction", run.config().solver.interior_fraction}};
  Json warnings = Json::array();
  try {
    const densctl::ConstraintReport a2 = densctl::check_A2_proxy(sol.controlled_potential, run.config().solver.a2_shells);
    summary["a2_controlled"] = a2.pass ? "PASS" : "FAIL";
    if (!a2.pass) warnings.push_back("controlled potential: " + a2.reason);
  } catch (const densctl::Error& e) {
    summary["a2_controlled"] = "SKIPPED";
    warnings.push_back(e.what());
  }
  summary["warnings"] = warnings;

  std::vector<std::string> names{"q", "psi", "v", "p", "Phi"};
  std::vector<Eigen::VectorXd> cols{q.values(), sol.desirability.values(), sol.value.values(), sol.density.values(),
                                    sol.controlled_potential.values()};
  append_vector_columns(sol.control, "u", names, cols);
  write_columns(run.output("solution.csv"), g, names, cols);
  run.json("summary.json", summary);
  run.say("c = " + fmt(sol.cost) + ", controlled gap = " + fmt(densctl::spectral_gap(cs)));
  run.finish();
  return 0;
}

int cmd_spectrum(const Options& opt) {
  Run run(opt, "spectrum");
  const Fields f = fields(run.spec());
  const densctl::Grid& g = run.spec().grid;
  const int k = run.modes(g.size());
  if (k < 1 || static_cast<std::size_t>(k) > g.size()) {
    throw densctl::InputError("--k must be between 1 and the node count " + std::to_string(g.size()));
  }
  densctl::GeneratorOperator op;
  if (opt.controlled) {
    if (!gate(run)) return 1;
    op = densctl::controlled_generator(stationary_solution(run, f), f.sigma);
  } else {
    op = densctl::assemble_generator(f.sigma, f.phi, g);
  }
  const densctl::Spectrum s = densctl::eig_generator(op, k, run.spectral_options());

  {
    densctl::CsvWriter csv(run.output("eigenvalues.csv"), {"n", "xi"});
    for (int n = 0; n < s.count(); ++n) csv.row({static_cast<double>(n), s.eigenvalue(n)});
  }
  std::vector<std::string> names;
  std::vector<Eigen::VectorXd> cols;
  for (int n = 0; n < s.count(); ++n) {
    names.push_back("Xi" + std::to_string(n));
    cols.push_back(s.eigenfunctions.col(n));
  }
  write_columns(run.output("modes.csv"), g, names, cols);
  Json summary = {{"operator", opt.controlled ? "controlled" : "uncontrolled"}, {"eigenvalues", vector_json(s.eigenvalues)}};
  if (s.count() >= 2) summary["gap"] = -s.eigenvalue(1);
  run.json("summary.json", summary);
  std::string line = "eigenvalues:";
  for (int n = 0; n < s.count(); ++n) line += " " + fmt(s.eigenvalue(n));
  run.say(line);
  run.finish();
  return 0;
}

int cmd_evolve(const Options& opt) {
  Run run(opt, "evolve");
  if (!gate(run)) return 1;
  const Fields f = fields(run.spec());
  const densctl::HJBSolution sol = stationary_solution(run, f);
  const densctl::Grid& g = sol.grid;
  const densctl::GeneratorOperator op = densctl::controlled_generator(sol, f.sigma);
  const int k = std::min<int>(run.modes(g.size()), static_cast<int>(g.size()));
  const densctl::Spectrum s = densctl::eig_generator(op, k, run.spectral_options());
  const double gap = densctl::spectral_gap(s);

  Json warnings = Json::array();
  const std::string pert = opt.perturbation.empty() ? run.config().solver.perturbation : opt.perturbation;
  densctl::ScalarField p0;
  if (pert.rfind("mode:", 0) == 0) {
    int n = 0;
    try {
      n = std::stoi(pert.substr(5));
    } catch (const std::exception&) {
      throw densctl::InputError("perturbation 'mode:N' needs an integer N");
    }
    if (n < 0 || n >= s.count()) throw densctl::InputError("perturbation mode index outside the computed modes");
    p0 = s.mode(n);
  } else {
    p0 = densctl::eval_scalar_field(densctl::parse_expression(pert), g);
  }
  {
    const densctl::ScalarField one = densctl::ScalarField::constant(g, 1.0);
    const double mean = densctl::weighted_inner(p0, one, op.weight);
    if (std::abs(mean) > 1e-8 * std::max(1.0, densctl::weighted_norm(p0, op.weight))) {
      warnings.push_back("perturbation not mass preserving (<p,1>_rho = " + fmt(mean) + "); projected onto S0");
      p0 = densctl::project_mass_zero(p0, op.weight);
    }
  }

  // Crank-Nicolson positivity needs dt small against the fastest computed mode.
  const double dt_max = 0.5 / std::abs(s.eigenvalue(s.count() - 1));
  const double dt = run.config().solver.dt > 0.0 ? run.config().solver.dt : std::min(0.1 / gap, dt_max);
  if (dt > dt_max) {
    throw densctl::InputError("solver.dt = " + fmt(dt) + " exceeds 0.5/|xi_k| = " + fmt(dt_max) +
                              " (fastest computed mode)");
  }
  const double horizon = opt.horizon ? *opt.horizon : (run.config().solver.horizon > 0.0 ? run.config().solver.horizon : 5.0 / gap);
  const int dump = opt.dump_every ? *opt.dump_every : run.config().solver.dump_every;
  densctl::EvolveOptions eo;
  eo.store_every = dump;
  const densctl::DensityTrajectory tr = densctl::evolve_perturbation(op, p0, dt, horizon, eo);
  const densctl::PerturbationCoefficients coef = densctl::expand_in_eigenbasis(p0, s);

  const double p0_norm = densctl::weighted_norm(p0, op.weight);
  double worst = 0.0;
  {
    densctl::CsvWriter csv(run.output("trajectory.csv"), {"t", "mass", "norm", "min"});
    for (std::size_t i = 0; i < tr.times.size(); ++i) csv.row({tr.times[i], tr.mass[i], tr.norm[i], tr.min_value[i]});
  }
  if (dump > 0) {
    std::vector<std::string> header{"t"};
    for (const std::string& c : densctl::coordinate_header(g)) header.push_back(c);
    header.insert(header.end(), {"p_tilde", "p_tilde_modal"});
    densctl::CsvWriter csv(run.output("density.csv"), header);
    for (std::size_t j = 0; j < tr.snapshots.size(); ++j) {
      const densctl::ScalarField modal = densctl::eigen_evolution(coef, s, tr.snapshot_times[j]);
      for (std::size_t i = 0; i < g.size(); ++i) {
        std::vector<double> row{tr.snapshot_times[j]};
        for (int d = 0; d < g.dim(); ++d) row.push_back(g.coordinate(i, d));
        row.push_back(tr.snapshots[j][i]);
        row.push_back(modal[i]);
        csv.row(row);
      }
    }
  }
  for (std::size_t j = 0; j < tr.snapshots.size(); ++j) {
    const densctl::ScalarField modal = densctl::eigen_evolution(coef, s, tr.snapshot_times[j]);
    const densctl::ScalarField diff(g, tr.snapshots[j].values() - modal.values());
    worst = std::max(worst, densctl::weighted_norm(diff, op.weight));
  }

  Json summary = {{"xi1", s.eigenvalue(1)},
                  {"dt", dt},
                  {"T", horizon},
                  {"initial_norm", p0_norm},
                  {"reconstruction_error", coef.reconstruction_error},
                  {"pde_vs_modal_max_rho_norm", worst},
                  {"max_mass_drift", 0.0}};
  double drift = 0.0;
  for (double m : tr.mass) drift = std::max(drift, std::abs(m - 1.0));
  summary["max_mass_drift"] = drift;
  if (p0_norm > 0.0) {
    const double t_lo = 0.5 / gap, t_hi = std::min(3.0 / gap, horizon);
    try {
      summary["fitted_rate"] = densctl::fit_decay_rate(tr.times, tr.norm, t_lo, t_hi);
    } catch (const densctl::InputError& e) {
      warnings.push_back(std::string("decay fit skipped: ") + e.what());
    }
  }
  for (const std::string& w : tr.warnings) warnings.push_back(w);
  summary["warnings"] = warnings;
  run.json("summary.json", summary);
  if (summary.contains("fitted_rate")) {
    run.say("fitted decay rate " + fmt(summary["fitted_rate"].get<double>()) + ", xi1 = " + fmt(s.eigenvalue(1)));
  }
  run.finish();
  return 0;
}

// ---------------------------------------------------------------------------
// Sampling

densctl::SdeConfig sde_config(const Run& run) {
  const densctl::SamplingSettings& ss = run.config().sampling;
  densctl::SdeConfig c;
  c.dt = ss.dt;
  c.horizon = ss.horizon;
  c.seed = ss.seed;
  c.paths = ss.paths;
  c.threads = ss.threads;
  c.record_every = ss.record_every;
  c.steps();
  return c;
}

densctl::SmallVector start_point(const Run& run) {
  const int n = run.spec().grid.dim();
  densctl::SmallVector x = densctl::SmallVector::Zero(n);
  const std::vector<double>& x0 = run.config().sampling.x0;
  if (!x0.empty()) {
    if (static_cast<int>(x0.size()) != n) throw densctl::InputError("sampling.x0 has the wrong dimension");
    for (int k = 0; k < n; ++k) x[k] = x0[static_cast<std::size_t>(k)];
  }
  return x;
}

int sample_paths(Run& run) {
  const Fields f = fields(run.spec());
  const std::string& drift = run.config().sampling.drift;
  std::optional<densctl::SdeModel> model;
  if (drift == "uncontrolled") {
    model.emplace(densctl::uncontrolled_model(run.spec()));
  } else if (drift == "steady_control") {
    model.emplace(densctl::steady_control_model(run.spec(), stationary_solution(run, f)));
  } else if (drift == "density_feedback") {
    model.emplace(densctl::density_feedback_model(run.spec(), stationary_solution(run, f).density));
  } else {
    throw densctl::InputError("sampling.drift must be uncontrolled, steady_control or density_feedback");
  }
  const densctl::SdeConfig cfg = sde_config(run);
  const densctl::TrajectoryBatch b = densctl::simulate_sde(*model, cfg, densctl::point_ensemble(start_point(run)));
  const int n = b.dim;
  {
    std::vector<std::string> header{"path"};
    for (const std::string& c : densctl::coordinate_header(run.spec().grid)) header.push_back(c);
    header.insert(header.end(), {"exited", "excluded"});
    densctl::CsvWriter csv(run.output("terminal.csv"), header);
    for (std::size_t i = 0; i < b.paths(); ++i) {
      std::vector<double> row{static_cast<double>(i)};
      for (int k = 0; k < n; ++k) row.push_back(b.terminal(static_cast<Eigen::Index>(i), k));
      row.push_back(b.exited[i]);
      row.push_back(b.blown_up[i]);
      csv.row(row);
    }
  }
  if (!b.recorded.empty()) {
    std::vector<std::string> header{"t", "path"};
    for (const std::string& c : densctl::coordinate_header(run.spec().grid)) header.push_back(c);
    densctl::CsvWriter csv(run.output("paths.csv"), header);
    for (std::size_t r = 0; r < b.recorded.size(); ++r) {
      for (std::size_t i = 0; i < b.paths(); ++i) {
        std::vector<double> row{b.record_times[r], static_cast<double>(i)};
        for (int k = 0; k < n; ++k) row.push_back(b.recorded[r](static_cast<Eigen::Index>(i), k));
        csv.row(row);
      }
    }
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n), var = Eigen::VectorXd::Zero(n);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < b.paths(); ++i) {
    if (b.blown_up[i]) continue;
    mean += b.terminal.row(static_cast<Eigen::Index>(i)).transpose();
    ++kept;
  }
  if (kept > 0) mean /= static_cast<double>(kept);
  for (std::size_t i = 0; i < b.paths(); ++i) {
    if (b.blown_up[i]) continue;
    var += (b.terminal.row(static_cast<Eigen::Index>(i)).transpose() - mean).cwiseAbs2();
  }
  if (kept > 1) var /= static_cast<double>(kept - 1);
  run.json("summary.json", {{"seed", cfg.seed},
                            {"drift", drift},
                            {"paths", b.paths()},
                            {"excluded", b.excluded()},
                            {"exited", b.exit_count()},
                            {"terminal_mean", vector_json(mean)},
                            {"terminal_variance", vector_json(var)}});
  run.say("terminal mean " + fmt(mean[0]) + ", variance " + fmt(var[0]));
  return 0;
}

int sample_desirability(Run& run) {
  require_mode(run, densctl::Mode::forward);
  const Fields f = fields(run.spec());
  const densctl::ScalarField q = densctl::cost_field(run.spec());
  const densctl::HJBSolution sol = forward_solution(run, f);
  const double c = run.config().sampling.c ? *run.config().sampling.c : sol.cost;
  const int n = run.spec().grid.dim();
  std::vector<densctl::SmallVector> pts;
  for (const std::vector<double>& p : run.config().sampling.points) {
    if (static_cast<int>(p.size()) != n) throw densctl::InputError("sampling.points entry has the wrong dimension");
    densctl::SmallVector v(n);
    for (int k = 0; k < n; ++k) v[k] = p[static_cast<std::size_t>(k)];
    pts.push_back(v);
  }
  if (pts.empty()) throw densctl::InputError("sampling.points must list at least one query point");
  std::size_t ref = 0;
  for (std::size_t j = 1; j < pts.size(); ++j) {
    if (pts[j].norm() < pts[ref].norm()) ref = j;
  }

  const densctl::SdeModel passive = densctl::uncontrolled_model(run.spec());
  const densctl::SdeConfig cfg = sde_config(run);
  const std::vector<densctl::PointEstimate> est = densctl::path_integral_desirability(passive, q, c, run.spec().lambda, pts, cfg);
  const auto grid_psi = [&](const densctl::SmallVector& x) { return passive.interpolate(sol.desirability.values(), x.data()); };

  std::vector<std::string> header = densctl::coordinate_header(run.spec().grid);
  header.insert(header.end(), {"psi_hat", "stderr", "ratio", "ratio_stderr", "grid_ratio", "excluded"});
  densctl::CsvWriter csv(run.output("desirability.csv"), header);
  Json points = Json::array();
  Json warnings = Json::array();
  bool all_within = true;
  const densctl::PointEstimate& e0 = est[ref];
  for (const densctl::PointEstimate& e : est) {
    const double ratio = e.mean / e0.mean;
    const double rse = std::abs(ratio) * std::sqrt(std::pow(e.stderr_ / e.mean, 2) + std::pow(e0.stderr_ / e0.mean, 2));
    const double grid_ratio = grid_psi(e.point) / grid_psi(e0.point);
    const bool within = std::abs(ratio - grid_ratio) <= 3.0 * rse;
    all_within = all_within && within;
    std::vector<double> row;
    for (int k = 0; k < n; ++k) row.push_back(e.point[k]);
    row.insert(row.end(), {e.mean, e.stderr_, ratio, rse, grid_ratio, static_cast<double>(e.excluded)});
    csv.row(row);
    points.push_back({{"point", vector_json(e.point)},
                      {"psi_hat", e.mean},
                      {"stderr", e.stderr_},
                      {"ratio", ratio},
                      {"ratio_stderr", rse},
                      {"grid_ratio", grid_ratio},
                      {"within_3_stderr", within},
                      {"excluded", e.excluded}});
    for (const std::string& w : e.warnings) warnings.push_back(w);
  }
  run.json("summary.json", {{"seed", cfg.seed},
                            {"c", c},
                            {"T", cfg.horizon},
                            {"dt", cfg.dt},
                            {"paths", cfg.paths},
                            {"reference_point", ref},
                            {"points", points},
                            {"all_within_3_stderr", all_within},
                            {"note", "desirability is defined up to a constant factor; compare ratios"},
                            {"warnings", warnings}});
  run.say(std::string("path-integral ratios ") + (all_within ? "agree" : "disagree") + " with the grid desirability within 3 stderr");
  return 0;
}

int sample_cost(Run& run) {
  require_mode(run, densctl::Mode::forward);
  const densctl::ScalarField q = densctl::cost_field(run.spec());
  const densctl::SdeModel passive = densctl::uncontrolled_model(run.spec());
  const densctl::SdeConfig cfg = sde_config(run);
  const densctl::CostEstimate est = densctl::estimate_c_mc(passive, q, run.spec().lambda, cfg,
                                                           densctl::point_ensemble(start_point(run)), run.config().sampling.bootstrap);
  Json summary = {{"seed", cfg.seed}, {"c_hat", est.cost}, {"stderr", est.stderr_}, {"T", cfg.horizon},
                  {"dt", cfg.dt},     {"paths", cfg.paths}, {"excluded", est.excluded}};
  double c_spec = std::nan("");
  try {
    c_spec = forward_solution(run, fields(run.spec())).cost;
    summary["c_spectral"] = c_spec;
    summary["within_tolerance"] = std::abs(est.cost - c_spec) <= std::max(3.0 * est.stderr_, 0.05 * std::abs(c_spec));
  } catch (const densctl::Error& e) {
    summary["c_spectral"] = nullptr;
    summary["spectral_error"] = e.what();
  }
  summary["warnings"] = est.warnings;
  {
    densctl::CsvWriter csv(run.output("cost.csv"), {"c_hat", "stderr", "c_spectral"});
    csv.row({est.cost, est.stderr_, c_spec});
  }
  run.json("summary.json", summary);
  run.say("c_hat = " + fmt(est.cost) + " +- " + fmt(est.stderr_));
  return 0;
}

int sample_feedback(Run& run) {
  const Fields f = fields(run.spec());
  const densctl::Grid& g = run.spec().grid;
  const densctl::ScalarField target =
      run.spec().mode == densctl::Mode::inverse ? densctl::target_field(run.spec()) : forward_solution(run, f).density;
  const densctl::SdeModel fb = densctl::density_feedback_model(run.spec(), target);
  densctl::SdeConfig cfg = sde_config(run);
  const densctl::SamplingSettings& ss = run.config().sampling;
  const densctl::Ensemble start = densctl::uniform_ensemble(g, ss.particles, cfg.seed);
  const densctl::EnsembleTrajectory tr = densctl::simulate_density_feedback(fb, cfg, start, ss.record_every);

  double tv_final = 0.0;
  {
    densctl::CsvWriter csv(run.output("tv.csv"), {"t", "tv", "clipped"});
    for (std::size_t j = 0; j < tr.snapshots.size(); ++j) {
      const densctl::Histogram h = densctl::histogram_density(tr.snapshots[j], g);
      tv_final = densctl::total_variation(h.density, target);
      csv.row({tr.times[j], tv_final, static_cast<double>(h.clipped)});
    }
  }
  const densctl::Histogram h = densctl::histogram_density(tr.snapshots.back(), g);
  write_columns(run.output("histogram.csv"), g, {"p_hat", "p_target"}, {h.density.values(), target.values()});
  run.json("summary.json", {{"seed", cfg.seed},
                            {"particles", ss.particles},
                            {"T", cfg.horizon},
                            {"dt", cfg.dt},
                            {"tv_final", tv_final},
                            {"flagged", tr.flagged},
                            {"clipped", h.clipped}});
  run.say("total variation at T: " + fmt(tv_final));
  return 0;
}

int cmd_sample(const Options& opt) {
  Run run(opt, "sample-" + opt.sample_kind);
  int code = 0;
  if (opt.sample_kind == "paths") {
    code = sample_paths(run);
  } else if (opt.sample_kind == "desirability") {
    code = sample_desirability(run);
  } else if (opt.sample_kind == "cost") {
    code = sample_cost(run);
  } else {
    code = sample_feedback(run);
  }
  run.finish();
  return code;
}

int cmd_inverse(const Options& opt) {
  Run run(opt, "inverse");
  require_mode(run, densctl::Mode::inverse);
  if (!gate(run)) return 1;
  const Fields f = fields(run.spec());
  const densctl::InverseSolution inv = densctl::solve_inverse(run.spec());
  const densctl::RoundTripReport rep =
      densctl::roundtrip_verify(inv, f.sigma, f.phi, run.spec().lambda, run.spectral_options(), run.config().solver.interior_fraction);
  const densctl::Grid& g = run.spec().grid;

  std::vector<std::string> names{"p_target", "psi", "q", "v"};
  std::vector<Eigen::VectorXd> cols{inv.target.values(), inv.desirability.values(), inv.cost.values(), inv.value.values()};
  append_vector_columns(inv.control, "u", names, cols);
  names.push_back("p_recovered");
  cols.push_back(rep.recovered_density.values());
  write_columns(run.output("inverse.csv"), g, names, cols);
  run.json("report.json", {{"c_inverse", rep.c_inverse},
                           {"c_forward", rep.c_forward},
                           {"cost_error", rep.cost_error},
                           {"density_sup_error", rep.density_error},
                           {"control_sup_error_interior", rep.control_error},
                           {"controlled_gap", rep.controlled_gap},
                           {"uncontrolled_gap", rep.uncontrolled_gap},
                           {"growth_ratio", rep.growth_ratio},
                           {"quadratic_growth", rep.quadratic_growth},
                           {"warnings", rep.warnings}});
  for (const std::string& w : rep.warnings) run.say("WARN " + w);
  run.say("c = " + fmt(rep.c_inverse) + ", round-trip density error " + fmt(rep.density_error) + ", controlled gap " +
          fmt(rep.controlled_gap));
  run.finish();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Design and verification of stationary density controls"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", densctl::kVersion);
  Options opt;
  app.add_option("--config", opt.config, "JSON run configuration")->envname("DENSCTL_CONFIG");
  app.add_option("--out", opt.out, "Output root directory")->envname("DENSCTL_OUT");
  app.add_option("--seed", opt.seed, "Random seed (overrides sampling.seed)")->envname("DENSCTL_SEED");
  app.add_option("--threads", opt.threads, "Worker threads for sampling")->envname("DENSCTL_THREADS")->check(CLI::PositiveNumber);
  app.add_option("--k", opt.k, "Number of eigenmodes")->envname("DENSCTL_K");
  app.add_flag("--quiet", opt.quiet, "Suppress console output")->envname("DENSCTL_QUIET");

  CLI::App* check = app.add_subcommand("check", "Validate a configuration (SPD, A1, A2 proxy, cost bounds)");
  CLI::App* solve = app.add_subcommand("solve", "Solve the stationary HJB problem");
  CLI::App* spectrum = app.add_subcommand("spectrum", "Leading eigenpairs of the generator");
  spectrum->add_flag("--controlled", opt.controlled, "Use the optimally controlled generator");
  CLI::App* evolve = app.add_subcommand("evolve", "Evolve a density perturbation and fit its decay");
  evolve->add_option("--perturbation", opt.perturbation, "Expression in x1.. or mode:N");
  evolve->add_option("--T", opt.horizon, "Horizon")->check(CLI::PositiveNumber);
  evolve->add_option("--dump-every", opt.dump_every, "Dump the density every S steps")->check(CLI::NonNegativeNumber);
  CLI::App* sample = app.add_subcommand("sample", "Monte Carlo estimators");
  sample->add_option("kind", opt.sample_kind, "paths | desirability | cost | feedback")
      ->required()
      ->check(CLI::IsMember({"paths", "desirability", "cost", "feedback"}));
  CLI::App* inverse = app.add_subcommand("inverse", "Synthesise q and u from a target density and verify the round trip");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (opt.config.empty()) {
    std::cerr << "error: --config is required\n";
    return 2;
  }

  try {
    if (check->parsed()) return cmd_check(opt);
    if (solve->parsed()) return cmd_solve(opt);
    if (spectrum->parsed()) return cmd_spectrum(opt);
    if (evolve->parsed()) return cmd_evolve(opt);
    if (sample->parsed()) return cmd_sample(opt);
    if (inverse->parsed()) return cmd_inverse(opt);
  } catch (const densctl::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: config: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    if (!g_run_dir.empty()) {
      try {
        fs::create_directories(g_run_dir);
        densctl::write_json(g_run_dir / "error.json", {{"error", e.what()}, {"exit_code", 1}});
      } catch (const std::exception&) {
      }
    }
    return 1;
  }
  return 2;
}
