#pragma once

// Free-field optimal control with sequential (Krotov-type) updates.
//
// J[E] = Tr[P rho(T)] - alpha * sum_k E_k^2 dt, with P the projector on the
// target wells (sign -1 for minimization). The field is piecewise constant on
// [0, window]; after the window the system relaxes field-free up to T.

#include "isomctl/field.hpp"
#include "isomctl/propagator.hpp"

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace isomctl {

class OctError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GuessPulse {
  double amplitude = 300.0;  // MV/m
  double center = 5.0;       // fs
  double fwhm = 10.0;        // fs, intensity envelope
  double carrier = 25000.0;  // cm^-1
};

struct OctConfig {
  bool maximize = true;       // target +P_cis or -P_cis
  double target_time = 5000.0;  // fs
  double window = 160.0;      // fs
  double dt = 0.05;           // fs
  double alpha = 1e-8;        // penalty, 1/((MV/m)^2 fs)
  int max_iterations = 12;
  double stagnation = 1e-6;   // |dJ| threshold
  int stagnation_window = 5;  // consecutive iterations
  double monotonic_tolerance = 1e-8;
  int checkpoint_stride = 500;  // steps between stored costates
  bool safeguard = true;        // per-step acceptance test on the update
  std::optional<std::pair<double, double>> band;  // cm^-1, projection after every iteration
  GuessPulse guess;

  void validate() const;
  std::size_t steps() const;
};

struct OctIterate {
  int iteration = 0;
  double J = 0.0;
  double yield = 0.0;    // P_cis(T)
  double penalty = 0.0;  // alpha * fluence
  double fluence = 0.0;  // (MV/m)^2 fs
  double max_field = 0.0;
  int rejected_steps = 0;
};

struct OctReport {
  SampledField field;  // piecewise constant, grid.dt == dt
  std::vector<OctIterate> history;
  std::string stop_reason;
  bool converged = false;
};

struct OctHooks {
  std::function<void(const OctIterate&, const SampledField&)> on_iteration;
};

/// Guess field on the piecewise-constant control grid.
SampledField guess_field(const OctConfig& cfg);

/// Diagonal target operator: +-1 on the cis wells.
Eigen::VectorXd target_projector(const SystemView& sys, bool maximize);

/// Costate at t = 0 propagated backward from Lambda(T) = diag(target) under `field`.
Propagator::State backward_propagate(const Propagator& prop, const Eigen::VectorXd& target, const SampledField& field,
                                     double target_time);

/// Objective Tr[P rho(T)] for a piecewise-constant field.
double forward_objective(const Propagator& prop, const DensityMatrix& rho0, const Eigen::VectorXd& target,
                         const SampledField& field, double target_time);

/// Field update E_k = g_k / (2 alpha) from paired costate and state samples.
double update_field(double gradient, double alpha);

/// dJ/dE_k of Tr[P rho(T)] for the discrete propagator, one entry per control step.
std::vector<double> objective_gradient(const Propagator& prop, const DensityMatrix& rho0,
                                       const Eigen::VectorXd& target, const SampledField& field, double target_time);

OctReport optimize(const Propagator& prop, const DensityMatrix& rho0, const OctConfig& cfg, const OctHooks& hooks = {},
                   std::optional<SampledField> start = std::nullopt);

}  // namespace isomctl
