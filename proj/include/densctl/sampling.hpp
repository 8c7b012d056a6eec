#pragma once

// Euler-Maruyama simulation of dx = (b + u) dt + sigma dw on the truncated box,
// Monte Carlo estimators built on it, and particle histograms.
//
// SDE coefficients are tabulated on the grid and interpolated multilinearly at
// particle positions. Path i of an estimator draws its noise from the stream
// (seed, stream_offset + i); reductions run in path order, so outputs are
// bit-identical for any thread count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "densctl/error.hpp"
#include "densctl/grid.hpp"
#include "densctl/model.hpp"
#include "densctl/random.hpp"
#include "densctl/spectral.hpp"

namespace densctl {

enum class DriftMode { uncontrolled, steady_control, density_feedback };

struct SdeConfig {
  double dt = 1e-3;
  double horizon = 1.0;
  std::uint64_t seed = 0;
  std::size_t paths = 1;
  std::uint64_t stream_offset = 0;
  int threads = 1;
  int record_every = 0;  // 0: terminal states only
  DriftMode drift = DriftMode::uncontrolled;

  long steps() const {
    if (!(dt > 0.0) || !(horizon >= dt) || paths < 1) {
      throw InputError("sampling needs dt > 0, T >= dt and at least one path");
    }
    return static_cast<long>(std::llround(horizon / dt));
  }
};

struct Ensemble {
  Eigen::MatrixXd positions;  // count x dim
  std::uint64_t seed = 0;
  std::string provenance;

  std::size_t count() const { return static_cast<std::size_t>(positions.rows()); }
  int dim() const { return static_cast<int>(positions.cols()); }
};

inline Ensemble point_ensemble(const SmallVector& x, std::size_t count = 1) {
  Ensemble e;
  e.positions = x.transpose().replicate(static_cast<Eigen::Index>(count), 1);
  e.provenance = "point";
  return e;
}

inline Ensemble uniform_ensemble(const Grid& g, std::size_t count, std::uint64_t seed, std::uint64_t stream = ~0ULL) {
  Ensemble e;
  e.positions.resize(static_cast<Eigen::Index>(count), g.dim());
  RandomStream rng(seed, stream);
  for (std::size_t i = 0; i < count; ++i) {
    for (int k = 0; k < g.dim(); ++k) {
      e.positions(static_cast<Eigen::Index>(i), k) = g.axis(k).lower + (g.axis(k).upper - g.axis(k).lower) * rng.uniform();
    }
  }
  e.seed = seed;
  e.provenance = "uniform";
  return e;
}

// ---------------------------------------------------------------------------
// Tabulated SDE coefficients
// ---------------------------------------------------------------------------

class SdeModel {
 public:
  /// `drift` is node-count x n, `volatility` holds one n x m matrix per node.
  SdeModel(const VectorField& drift, const std::vector<Eigen::MatrixXd>& volatility,
           std::optional<ScalarField> density = std::nullopt)
      : grid_(drift.grid()), dim_(grid_.dim()) {
    if (volatility.size() != grid_.size()) throw ShapeError("volatility field size does not match grid");
    brownian_ = static_cast<int>(volatility.front().cols());
    const auto n = static_cast<Eigen::Index>(grid_.size());
    drift_ = drift.values();
    vol_.resize(n, dim_ * brownian_);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::MatrixXd& s = volatility[static_cast<std::size_t>(i)];
      if (s.rows() != dim_ || s.cols() != brownian_) throw ShapeError("volatility has inconsistent shape");
      for (int r = 0; r < dim_; ++r) {
        for (int c = 0; c < brownian_; ++c) vol_(i, r * brownian_ + c) = s(r, c);
      }
    }
    if (density) {
      require_same_grid(density->grid(), grid_, "SdeModel");
      density_ = density->values();
    }
  }

  const Grid& grid() const { return grid_; }
  int dim() const { return dim_; }
  int brownian_dim() const { return brownian_; }
  bool has_density_floor() const { return density_.size() > 0; }

  struct Locator {
    std::size_t base = 0;
    std::array<double, kMaxDim> t{};
  };

  Locator locate(const double* x) const {
    Locator loc;
    for (int k = 0; k < dim_; ++k) {
      const Axis& a = grid_.axis(k);
      const double u = (x[k] - a.lower) / a.spacing();
      int i0 = static_cast<int>(std::floor(u));
      i0 = std::clamp(i0, 0, a.nodes - 2);
      loc.base += static_cast<std::size_t>(i0) * grid_.stride(k);
      loc.t[static_cast<std::size_t>(k)] = std::clamp(u - i0, 0.0, 1.0);
    }
    return loc;
  }

  /// Multilinear interpolation in lerp form (exact for constant data).
  template <class Access>
  double interpolate(const Locator& loc, Access&& f) const {
    const auto lerp = [](double a, double b, double t) { return a + t * (b - a); };
    const std::size_t b = loc.base;
    switch (dim_) {
      case 1: return lerp(f(b), f(b + grid_.stride(0)), loc.t[0]);
      case 2: {
        const std::size_t s0 = grid_.stride(0), s1 = grid_.stride(1);
        return lerp(lerp(f(b), f(b + s1), loc.t[1]), lerp(f(b + s0), f(b + s0 + s1), loc.t[1]), loc.t[0]);
      }
      default: {
        const std::size_t s0 = grid_.stride(0), s1 = grid_.stride(1), s2 = grid_.stride(2);
        const auto plane = [&](std::size_t o) {
          return lerp(lerp(f(o), f(o + s2), loc.t[2]), lerp(f(o + s1), f(o + s1 + s2), loc.t[2]), loc.t[1]);
        };
        return lerp(plane(b), plane(b + s0), loc.t[0]);
      }
    }
  }

  double interpolate(const Eigen::VectorXd& field, const double* x) const {
    const Locator loc = locate(x);
    return interpolate(loc, [&](std::size_t i) { return field[static_cast<Eigen::Index>(i)]; });
  }

  double drift(const Locator& loc, int k) const {
    return interpolate(loc, [&](std::size_t i) { return drift_(static_cast<Eigen::Index>(i), k); });
  }

  double volatility(const Locator& loc, int r, int c) const {
    return interpolate(loc, [&](std::size_t i) { return vol_(static_cast<Eigen::Index>(i), r * brownian_ + c); });
  }

  double density(const double* x) const { return interpolate(density_, x); }

  /// Fold a position back into the box by reflection; returns true if it had left.
  bool reflect(double* x) const {
    bool left = false;
    for (int k = 0; k < dim_; ++k) {
      const Axis& a = grid_.axis(k);
      if (x[k] < a.lower) {
        x[k] = a.lower + (a.lower - x[k]);
        left = true;
      } else if (x[k] > a.upper) {
        x[k] = a.upper - (x[k] - a.upper);
        left = true;
      }
      x[k] = std::clamp(x[k], a.lower, a.upper);
    }
    return left;
  }

 private:
  Grid grid_;
  int dim_ = 1;
  int brownian_ = 1;
  Eigen::MatrixXd drift_;
  Eigen::MatrixXd vol_;
  Eigen::VectorXd density_;
};

/// Passive dynamics b = div(Sigma)/2 - Sigma grad(phi)/2.
inline SdeModel uncontrolled_model(const TensorField& sigma, const std::vector<Eigen::MatrixXd>& vol, const ScalarField& phi) {
  return SdeModel(drift_from_potential(sigma, phi), vol);
}

/// b + u with a tabulated feedback control u.
inline SdeModel controlled_model(const TensorField& sigma, const std::vector<Eigen::MatrixXd>& vol, const ScalarField& phi,
                                 const VectorField& control) {
  const VectorField b = drift_from_potential(sigma, phi);
  return SdeModel(VectorField(b.grid(), b.values() + control.values()), vol);
}

/// Drift written only through the target density: div(Sigma)/2 + (Sigma/2) grad(p)/p,
/// with grad(p)/p evaluated as grad(log p).
inline SdeModel density_feedback_model(const TensorField& sigma, const std::vector<Eigen::MatrixXd>& vol,
                                       const ScalarField& target) {
  if (!(target.min() > 0.0)) throw DomainError("density feedback needs a strictly positive target");
  sigma.require_spd();
  const Grid& g = target.grid();
  const ScalarField log_p(g, target.values().array().log().matrix());
  const VectorField grad = fd::gradient(log_p);
  const VectorField div = fd::divergence(sigma);
  Eigen::MatrixXd d(static_cast<Eigen::Index>(g.size()), g.dim());
  for (std::size_t i = 0; i < g.size(); ++i) {
    d.row(static_cast<Eigen::Index>(i)) = (0.5 * div.at(i) + 0.5 * sigma[i] * grad.at(i)).transpose();
  }
  return SdeModel(VectorField(g, std::move(d)), vol, target);
}

inline SdeModel uncontrolled_model(const ProblemSpec& s) {
  const TensorField sigma = diffusion_field(s);
  sigma.require_spd(s.eps_spd);
  return uncontrolled_model(sigma, volatility_field(s), potential_field(s));
}

inline SdeModel steady_control_model(const ProblemSpec& s, const HJBSolution& sol) {
  const TensorField sigma = diffusion_field(s);
  sigma.require_spd(s.eps_spd);
  return controlled_model(sigma, volatility_field(s), potential_field(s), sol.control);
}

inline SdeModel density_feedback_model(const ProblemSpec& s, const ScalarField& target) {
  const TensorField sigma = diffusion_field(s);
  sigma.require_spd(s.eps_spd);
  return density_feedback_model(sigma, volatility_field(s), target);
}

// ---------------------------------------------------------------------------
// Path engine
// ---------------------------------------------------------------------------

namespace detail {

template <class Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(count, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (std::thread& t : pool) t.join();
}

struct PathState {
  std::array<double, kMaxDim> x{};
  double integral = 0.0;
  bool exited = false;
  bool blown_up = false;
  bool floor_hit = false;
};

/// Advance one path `steps` Euler-Maruyama steps and return the left Riemann
/// sum dt * sum_k integrand(x_k). The sum is scaled once at the end so that a
/// constant integrand gives an exactly reproducible value. `record(k, state)`
/// sees the state after every step.
template <class Integrand, class Record>
PathState run_path(const SdeModel& m, const double* x0, RandomStream rng, double dt, long steps, Integrand&& integrand,
                   Record&& record) {
  PathState s;
  const int n = m.dim();
  const int nb = m.brownian_dim();
  for (int k = 0; k < n; ++k) s.x[static_cast<std::size_t>(k)] = x0[k];
  const double sqdt = std::sqrt(dt);
  std::array<double, kMaxDim> z{};
  std::vector<double> zb(static_cast<std::size_t>(nb));
  for (long step = 0; step < steps; ++step) {
    const SdeModel::Locator loc = m.locate(s.x.data());
    s.integral += integrand(loc);
    for (int c = 0; c < nb; ++c) zb[static_cast<std::size_t>(c)] = rng.normal();
    std::array<double, kMaxDim> prev = s.x;
    for (int r = 0; r < n; ++r) {
      double noise = 0.0;
      for (int c = 0; c < nb; ++c) noise += m.volatility(loc, r, c) * zb[static_cast<std::size_t>(c)];
      z[static_cast<std::size_t>(r)] = m.drift(loc, r) * dt + noise * sqdt;
    }
    for (int r = 0; r < n; ++r) s.x[static_cast<std::size_t>(r)] += z[static_cast<std::size_t>(r)];
    bool finite = true;
    for (int r = 0; r < n; ++r) finite = finite && std::isfinite(s.x[static_cast<std::size_t>(r)]);
    if (!finite || !std::isfinite(s.integral)) {
      s.blown_up = true;
      return s;
    }
    if (m.reflect(s.x.data())) s.exited = true;
    if (m.has_density_floor() && m.density(s.x.data()) < 1e-300) {
      s.x = prev;
      s.floor_hit = true;
    }
    record(step + 1, s);
  }
  s.integral *= dt;
  return s;
}

}  // namespace detail

struct TrajectoryBatch {
  int dim = 1;
  double dt = 0.0;
  std::uint64_t seed = 0;
  Eigen::MatrixXd terminal;              // paths x dim
  std::vector<double> cost_integral;     // per path
  std::vector<unsigned char> exited;     // left the box and was reflected
  std::vector<unsigned char> blown_up;   // NaN state, excluded
  std::vector<double> record_times;
  std::vector<Eigen::MatrixXd> recorded;  // per record stamp, paths x dim

  std::size_t paths() const { return cost_integral.size(); }
  std::size_t excluded() const { return static_cast<std::size_t>(std::count(blown_up.begin(), blown_up.end(), 1)); }
  std::size_t exit_count() const { return static_cast<std::size_t>(std::count(exited.begin(), exited.end(), 1)); }
};

/// Simulate cfg.paths paths; path i starts at start.positions(i mod count).
template <class Integrand>
TrajectoryBatch simulate_sde(const SdeModel& m, const SdeConfig& cfg, const Ensemble& start, Integrand&& integrand) {
  if (start.count() == 0) throw InputError("empty starting ensemble");
  if (start.dim() != m.dim()) throw ShapeError("starting ensemble dimension does not match the model");
  const long steps = cfg.steps();
  TrajectoryBatch batch;
  batch.dim = m.dim();
  batch.dt = cfg.dt;
  batch.seed = cfg.seed;
  batch.terminal.resize(static_cast<Eigen::Index>(cfg.paths), m.dim());
  batch.cost_integral.assign(cfg.paths, 0.0);
  batch.exited.assign(cfg.paths, 0);
  batch.blown_up.assign(cfg.paths, 0);
  if (cfg.record_every > 0) {
    for (long k = cfg.record_every; k <= steps; k += cfg.record_every) {
      batch.record_times.push_back(static_cast<double>(k) * cfg.dt);
      batch.recorded.emplace_back(Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(cfg.paths), m.dim(),
                                                            std::numeric_limits<double>::quiet_NaN()));
    }
  }

  detail::parallel_for(cfg.paths, cfg.threads, [&](std::size_t i) {
    const Eigen::VectorXd x0 = start.positions.row(static_cast<Eigen::Index>(i % start.count())).transpose();
    const auto rec = [&](long k, const detail::PathState& s) {
      if (cfg.record_every > 0 && k % cfg.record_every == 0) {
        Eigen::MatrixXd& slot = batch.recorded[static_cast<std::size_t>(k / cfg.record_every - 1)];
        for (int r = 0; r < m.dim(); ++r) slot(static_cast<Eigen::Index>(i), r) = s.x[static_cast<std::size_t>(r)];
      }
    };
    const detail::PathState s =
        detail::run_path(m, x0.data(), RandomStream(cfg.seed, cfg.stream_offset + i), cfg.dt, steps, integrand, rec);
    for (int r = 0; r < m.dim(); ++r) batch.terminal(static_cast<Eigen::Index>(i), r) = s.x[static_cast<std::size_t>(r)];
    batch.cost_integral[i] = s.integral;
    batch.exited[i] = (s.exited || s.floor_hit) ? 1 : 0;
    batch.blown_up[i] = s.blown_up ? 1 : 0;
  });
  return batch;
}

inline TrajectoryBatch simulate_sde(const SdeModel& m, const SdeConfig& cfg, const Ensemble& start) {
  return simulate_sde(m, cfg, start, [](const SdeModel::Locator&) { return 0.0; });
}

// ---------------------------------------------------------------------------
// Path-integral estimators
// ---------------------------------------------------------------------------

struct PointEstimate {
  SmallVector point;
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t excluded = 0;
  std::vector<std::string> warnings;
};

/// Desirability Psi(y) ~ E[exp(-int_0^T (q - c)/lambda ds)] over uncontrolled
/// paths from each query point, terminal factor 1. Query j uses streams
/// stream_offset + j * paths + i.
inline std::vector<PointEstimate> path_integral_desirability(const SdeModel& passive, const ScalarField& q, double c,
                                                             double lambda, const std::vector<SmallVector>& points,
                                                             const SdeConfig& cfg) {
  require_same_grid(q.grid(), passive.grid(), "path_integral_desirability");
  std::vector<PointEstimate> out;
  const Eigen::VectorXd& qv = q.values();
  for (std::size_t j = 0; j < points.size(); ++j) {
    SdeConfig sub = cfg;
    sub.stream_offset = cfg.stream_offset + j * cfg.paths;
    sub.record_every = 0;
    const auto integrand = [&](const SdeModel::Locator& loc) {
      return (passive.interpolate(loc, [&](std::size_t i) { return qv[static_cast<Eigen::Index>(i)]; }) - c) / lambda;
    };
    const TrajectoryBatch b = simulate_sde(passive, sub, point_ensemble(points[j]), integrand);

    PointEstimate est;
    est.point = points[j];
    est.excluded = b.excluded();
    std::size_t n = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < b.paths(); ++i) {
      if (b.blown_up[i]) continue;
      sum += std::exp(-b.cost_integral[i]);
      ++n;
    }
    if (n == 0) throw NumericalError("every path blew up");
    est.mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < b.paths(); ++i) {
      if (b.blown_up[i]) continue;
      const double d = std::exp(-b.cost_integral[i]) - est.mean;
      ss += d * d;
    }
    est.stderr_ = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
    if (est.mean > 0.0 && est.stderr_ / est.mean > 0.5) {
      est.warnings.push_back("relative standard error above 0.5: estimator degenerate");
    }
    if (est.excluded > 0) est.warnings.push_back(std::to_string(est.excluded) + " paths excluded after blow-up");
    out.push_back(std::move(est));
  }
  return out;
}

struct CostEstimate {
  double cost = 0.0;
  double stderr_ = 0.0;
  std::size_t excluded = 0;
  std::vector<std::string> warnings;
};

namespace detail {

inline double log_mean_exp(const std::vector<double>& a) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : a) m = std::max(m, v);
  double s = 0.0;
  for (double v : a) s += std::exp(v - m);
  return m + std::log(s / static_cast<double>(a.size()));
}

}  // namespace detail

/// c ~ -(lambda/T) log E[exp(-int_0^T q/lambda ds)] with bootstrap standard error.
inline CostEstimate estimate_c_mc(const SdeModel& passive, const ScalarField& q, double lambda, const SdeConfig& cfg,
                                  const Ensemble& start, int bootstrap = 200) {
  require_same_grid(q.grid(), passive.grid(), "estimate_c_mc");
  const Eigen::VectorXd& qv = q.values();
  const auto integrand = [&](const SdeModel::Locator& loc) {
    return passive.interpolate(loc, [&](std::size_t i) { return qv[static_cast<Eigen::Index>(i)]; }) / lambda;
  };
  SdeConfig sub = cfg;
  sub.record_every = 0;
  const TrajectoryBatch b = simulate_sde(passive, sub, start, integrand);
  const double horizon = static_cast<double>(cfg.steps()) * cfg.dt;

  std::vector<double> exponent;
  exponent.reserve(b.paths());
  for (std::size_t i = 0; i < b.paths(); ++i) {
    if (!b.blown_up[i]) exponent.push_back(-b.cost_integral[i]);
  }
  if (exponent.empty()) throw NumericalError("every path blew up");

  CostEstimate est;
  est.excluded = b.excluded();
  est.cost = -(lambda / horizon) * detail::log_mean_exp(exponent) + 0.0;

  RandomStream rng(cfg.seed, 0xB007'0000'0000'0000ULL + cfg.stream_offset);
  std::vector<double> sample(exponent.size());
  double s1 = 0.0, s2 = 0.0;
  for (int r = 0; r < bootstrap; ++r) {
    for (double& v : sample) v = exponent[rng.below(exponent.size())];
    const double c = -(lambda / horizon) * detail::log_mean_exp(sample);
    s1 += c;
    s2 += c * c;
  }
  if (bootstrap > 1) {
    const double mean = s1 / bootstrap;
    est.stderr_ = std::sqrt(std::max(0.0, (s2 - bootstrap * mean * mean) / (bootstrap - 1)));
  }
  double wmax = -std::numeric_limits<double>::infinity();
  for (double v : exponent) wmax = std::max(wmax, v);
  double ws = 0.0, ws2 = 0.0;
  for (double v : exponent) {
    const double e = std::exp(v - wmax);
    ws += e;
    ws2 += e * e;
  }
  const double ess = ws * ws / ws2;
  if (ess < 0.01 * static_cast<double>(exponent.size())) {
    est.warnings.push_back("effective sample size below 1% of paths: weights degenerate");
  }
  return est;
}

// ---------------------------------------------------------------------------
// Density feedback ensembles and histograms
// ---------------------------------------------------------------------------

struct EnsembleTrajectory {
  std::vector<double> times;
  std::vector<Ensemble> snapshots;
  std::size_t flagged = 0;  // particles reflected at the box or pushed back from a vanishing density
};

/// Particles under dx = [div(Sigma)/2 + (Sigma/2) grad(p)/p] dt + sigma dw, snapshots every
/// `snapshot_every` steps (0: final only).
inline EnsembleTrajectory simulate_density_feedback(const SdeModel& feedback, const SdeConfig& cfg, const Ensemble& start,
                                                    int snapshot_every = 0) {
  if (!feedback.has_density_floor()) throw InputError("model was not built from a target density");
  SdeConfig sub = cfg;
  sub.paths = start.count();
  sub.record_every = snapshot_every;
  const TrajectoryBatch b = simulate_sde(feedback, sub, start);
  EnsembleTrajectory out;
  out.flagged = b.exit_count();
  out.times.push_back(0.0);
  out.snapshots.push_back(start);
  for (std::size_t r = 0; r < b.recorded.size(); ++r) {
    out.times.push_back(b.record_times[r]);
    Ensemble e;
    e.positions = b.recorded[r];
    e.seed = cfg.seed;
    e.provenance = "density-feedback";
    out.snapshots.push_back(std::move(e));
  }
  const double t_end = static_cast<double>(sub.steps()) * cfg.dt;
  if (out.times.back() < t_end - 1e-12) {
    out.times.push_back(t_end);
    Ensemble e;
    e.positions = b.terminal;
    e.seed = cfg.seed;
    e.provenance = "density-feedback";
    out.snapshots.push_back(std::move(e));
  }
  return out;
}

struct Histogram {
  ScalarField density;
  std::size_t clipped = 0;  // particles outside every cell
};

/// Cell counts over the node-centred cells, normalised by count * cell volume.
inline Histogram histogram_density(const Ensemble& e, const Grid& g) {
  if (e.count() == 0) throw InputError("histogram of an empty ensemble");
  if (e.dim() != g.dim()) throw ShapeError("ensemble dimension does not match grid");
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.size()));
  Histogram h;
  for (std::size_t p = 0; p < e.count(); ++p) {
    std::size_t node = 0;
    bool inside = true;
    for (int k = 0; k < g.dim(); ++k) {
      const Axis& a = g.axis(k);
      const double x = e.positions(static_cast<Eigen::Index>(p), k);
      const long i = std::lround((x - a.lower) / a.spacing());
      if (!(std::isfinite(x)) || i < 0 || i >= a.nodes) {
        inside = false;
        break;
      }
      node += static_cast<std::size_t>(i) * g.stride(k);
    }
    if (inside) {
      counts[static_cast<Eigen::Index>(node)] += 1.0;
    } else {
      ++h.clipped;
    }
  }
  h.density = ScalarField(g, counts / (static_cast<double>(e.count()) * g.cell_volume()));
  return h;
}

/// (1/2) sum w |p - q|.
inline double total_variation(const ScalarField& p, const ScalarField& q) {
  require_same_grid(p.grid(), q.grid(), "total_variation");
  return 0.5 * p.grid().cell_volume() * (p.values() - q.values()).cwiseAbs().sum();
}

}  // namespace densctl
