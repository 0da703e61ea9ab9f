#include "isomctl/oct.hpp"

#include "isomctl/units.hpp"

#include <cmath>
#include <sstream>

namespace isomctl {

namespace {

using State = Propagator::State;
using cplx = std::complex<double>;

void check_setup(const Propagator& prop, const OctConfig& cfg) {
  cfg.validate();
  if (prop.options().coupling != Coupling::Exact) throw OctError("optimal control needs exact dipole coupling");
  if (std::abs(prop.options().dt - cfg.dt) > 1e-12 * cfg.dt) {
    std::ostringstream os;
    os << "propagator step " << prop.options().dt << " fs differs from control step " << cfg.dt << " fs";
    throw OctError(os.str());
  }
}

void check_field(const SampledField& f, const OctConfig& cfg) {
  if (!f.piecewise_constant || f.values.size() != cfg.steps() || std::abs(f.grid.dt - cfg.dt) > 1e-12 * cfg.dt ||
      std::abs(f.grid.t_start) > 1e-12) {
    throw OctError("control field must be piecewise constant on the control grid");
  }
}

State diagonal_state(const Propagator& prop, const Eigen::VectorXd& d) {
  DensityMatrix m;
  m.rho = Eigen::MatrixXcd::Zero(d.size(), d.size());
  m.rho.diagonal() = d.cast<cplx>();
  return prop.to_state(m);
}

Eigen::VectorXd state_populations(const Propagator& prop, const State& s) {
  return prop.to_density(s).populations();
}

void step(const Propagator& prop, State& s, double e, Propagator::Workspace& ws) {
  const cplx v[3] = {e, e, e};
  prop.advance(s, v, false, ws);
}

void back_step(const Propagator& prop, State& s, double e, Propagator::Workspace& ws) {
  const cplx v[3] = {e, e, e};
  prop.adjoint_step(s, v, ws);
}

double sum_sq(const std::vector<double>& v) {
  double a = 0.0;
  for (double x : v) a += x * x;
  return a;
}

double max_abs(const std::vector<double>& v) {
  double a = 0.0;
  for (double x : v) a = std::max(a, std::abs(x));
  return a;
}

/// Costate at the end of the control window from the target at T.
State window_costate(const Propagator& prop, const Eigen::VectorXd& target, double window_end, double target_time) {
  return diagonal_state(prop, prop.relax_populations(target, target_time - window_end, true));
}

}  // namespace

void OctConfig::validate() const {
  auto fail = [](const std::string& m) { throw OctError("oct: " + m); };
  if (!(dt > 0)) fail("dt must be positive");
  if (!(window > 0)) fail("window must be positive");
  if (!(target_time >= window)) fail("target_time must not precede the end of the control window");
  if (!(alpha > 0)) fail("alpha must be positive");
  if (max_iterations < 0) fail("max_iterations must be non-negative");
  if (stagnation_window < 1) fail("stagnation_window must be at least 1");
  if (checkpoint_stride < 1) fail("checkpoint_stride must be at least 1");
  if (band && !(band->first >= 0 && band->second > band->first)) fail("band must satisfy 0 <= lo < hi");
  if (!(guess.fwhm > 0)) fail("guess fwhm must be positive");
}

std::size_t OctConfig::steps() const { return static_cast<std::size_t>(std::llround(window / dt)); }

SampledField guess_field(const OctConfig& cfg) {
  SampledField f;
  f.grid = {0.0, cfg.dt, cfg.steps()};
  f.piecewise_constant = true;
  f.provenance = Provenance::OctFree;
  f.values.resize(f.grid.n);
  const double w = cfg.guess.carrier * units::kWavenumberToAngular;
  const double c = 4.0 * std::log(2.0) / (cfg.guess.fwhm * cfg.guess.fwhm);
  for (std::size_t k = 0; k < f.grid.n; ++k) {
    const double t = f.grid.time(k) + 0.5 * cfg.dt;
    const double x = t - cfg.guess.center;
    f.values[k] = cfg.guess.amplitude * std::exp(-c * x * x) * std::cos(w * x);
  }
  return f;
}

Eigen::VectorXd target_projector(const SystemView& sys, bool maximize) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(sys.size());
  for (int i = 0; i < sys.size(); ++i) {
    if (sys.labels[i] == StateLabel::Cis) p(i) = maximize ? 1.0 : -1.0;
  }
  return p;
}

State backward_propagate(const Propagator& prop, const Eigen::VectorXd& target, const SampledField& field,
                         double target_time) {
  const double h = prop.options().dt;
  const double window_end = h * static_cast<double>(field.values.size());
  State lam = window_costate(prop, target, window_end, target_time);
  lam.time = window_end;
  auto ws = prop.make_workspace(lam.full);
  for (std::size_t k = field.values.size(); k-- > 0;) back_step(prop, lam, field.values[k], *ws);
  return lam;
}

double forward_objective(const Propagator& prop, const DensityMatrix& rho0, const Eigen::VectorXd& target,
                         const SampledField& field, double target_time) {
  State s = prop.to_state(rho0);
  auto ws = prop.make_workspace(s.full);
  for (double e : field.values) step(prop, s, e, *ws);
  const double window_end = prop.options().dt * static_cast<double>(field.values.size());
  const Eigen::VectorXd p = prop.relax_populations(state_populations(prop, s), target_time - window_end);
  return target.dot(p);
}

double update_field(double gradient, double alpha) { return gradient / (2.0 * alpha); }

std::vector<double> objective_gradient(const Propagator& prop, const DensityMatrix& rho0,
                                       const Eigen::VectorXd& target, const SampledField& field, double target_time) {
  const std::size_t n = field.values.size();
  const double window_end = prop.options().dt * static_cast<double>(n);
  // Costates at every step; intended for short test windows.
  std::vector<State> lam(n + 1);
  lam[n] = window_costate(prop, target, window_end, target_time);
  auto ws = prop.make_workspace(lam[n].full);
  for (std::size_t k = n; k-- > 0;) {
    lam[k] = lam[k + 1];
    back_step(prop, lam[k], field.values[k], *ws);
  }
  // One step is a quartic polynomial in E, so the central difference is exact up to rounding.
  constexpr double de = 1.0;
  std::vector<double> g(n);
  State s = prop.to_state(rho0);
  for (std::size_t k = 0; k < n; ++k) {
    State a = s, b = s;
    step(prop, a, field.values[k] + de, *ws);
    step(prop, b, field.values[k] - de, *ws);
    g[k] = (Propagator::overlap(lam[k + 1], a) - Propagator::overlap(lam[k + 1], b)) / (2.0 * de);
    step(prop, s, field.values[k], *ws);
  }
  return g;
}

OctReport optimize(const Propagator& prop, const DensityMatrix& rho0, const OctConfig& cfg, const OctHooks& hooks,
                   std::optional<SampledField> start) {
  check_setup(prop, cfg);
  OctReport rep;
  rep.field = start ? std::move(*start) : guess_field(cfg);
  check_field(rep.field, cfg);
  if (cfg.band) project_band(rep.field, cfg.band->first, cfg.band->second);

  const std::size_t n = cfg.steps();
  const double h = cfg.dt;
  const double window_end = h * static_cast<double>(n);
  const std::size_t K = static_cast<std::size_t>(cfg.checkpoint_stride);
  const Eigen::VectorXd target = target_projector(prop.system(), cfg.maximize);
  const State lam_end = window_costate(prop, target, window_end, cfg.target_time);

  State s0 = prop.to_state(rho0);
  if (s0.full != lam_end.full) throw OctError("initial state and costate use different sector layouts");
  auto ws = prop.make_workspace(s0.full);

  auto record = [&](int it, const State& rho_end, int rejected) {
    OctIterate r;
    r.iteration = it;
    const Eigen::VectorXd p = prop.relax_populations(state_populations(prop, rho_end), cfg.target_time - window_end);
    r.yield = prop.sum_over(p, StateLabel::Cis);
    r.fluence = sum_sq(rep.field.values) * h;
    r.penalty = cfg.alpha * r.fluence;
    r.J = target.dot(p) - r.penalty;
    r.max_field = max_abs(rep.field.values);
    r.rejected_steps = rejected;
    rep.history.push_back(r);
    if (hooks.on_iteration) hooks.on_iteration(r, rep.field);
  };

  {
    State s = s0;
    for (double e : rep.field.values) step(prop, s, e, *ws);
    record(0, s, 0);
  }

  int flat = 0;
  std::vector<State> seg(K + 1);
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    const std::vector<double> old = rep.field.values;

    // Backward sweep under the old field, keeping checkpoints.
    std::vector<State> ckpt((n + K - 1) / K + 1);
    State lam = lam_end;
    lam.time = window_end;
    ckpt[(n + K - 1) / K] = lam;
    for (std::size_t k = n; k-- > 0;) {
      back_step(prop, lam, old[k], *ws);
      if (k % K == 0) ckpt[k / K] = lam;
    }

    // Forward sweep with sequential updates.
    State s = s0;
    int rejected = 0;
    for (std::size_t k0 = 0; k0 < n; k0 += K) {
      const std::size_t k1 = std::min(k0 + K, n);
      seg[k1 - k0] = (k1 == n) ? ckpt[(n + K - 1) / K] : ckpt[k1 / K];
      for (std::size_t k = k1; k-- > k0 + 1;) {
        seg[k - k0] = seg[k + 1 - k0];
        back_step(prop, seg[k - k0], old[k], *ws);
      }
      for (std::size_t k = k0; k < k1; ++k) {
        const State& lnext = seg[k + 1 - k0];
        State a = s, b = lnext;
        prop.half_step_free(a, false, *ws);
        prop.half_step_free(b, true, *ws);
        double e = update_field(prop.field_gradient(b, a, *ws), cfg.alpha);
        if (cfg.safeguard && e != old[k]) {
          State so = s;
          step(prop, so, old[k], *ws);
          const double base = Propagator::overlap(lnext, so) - cfg.alpha * h * old[k] * old[k];
          double trial = e;
          bool ok = false;
          for (int m = 0; m < 6 && !ok; ++m) {
            State sc = s;
            step(prop, sc, trial, *ws);
            if (Propagator::overlap(lnext, sc) - cfg.alpha * h * trial * trial >= base) {
              ok = true;
              s = std::move(sc);
            } else {
              trial = old[k] + 0.5 * (trial - old[k]);
            }
          }
          if (ok) {
            e = trial;
          } else {
            ++rejected;
            e = old[k];
            s = std::move(so);
          }
        } else {
          step(prop, s, e, *ws);
        }
        rep.field.values[k] = e;
      }
    }

    if (cfg.band) {
      project_band(rep.field, cfg.band->first, cfg.band->second);
      s = s0;
      for (double e : rep.field.values) step(prop, s, e, *ws);
    }
    const double j_prev = rep.history.back().J;
    record(it, s, rejected);
    const double dj = rep.history.back().J - j_prev;
    if (!std::isfinite(rep.history.back().J)) {
      rep.field.values = old;
      rep.stop_reason = "non-finite objective";
      return rep;
    }
    if (!cfg.band && dj < -cfg.monotonic_tolerance) {
      std::ostringstream os;
      os << "monotonicity violated at iteration " << it << ": dJ = " << dj;
      rep.stop_reason = os.str();
      return rep;
    }
    flat = std::abs(dj) < cfg.stagnation ? flat + 1 : 0;
    if (flat >= cfg.stagnation_window) {
      rep.converged = true;
      rep.stop_reason = "stagnation";
      return rep;
    }
  }
  rep.stop_reason = "iteration limit";
  return rep;
}

}  // namespace isomctl
