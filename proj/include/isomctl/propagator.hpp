#pragma once

// Secular Redfield propagation of the density matrix in the eigenbasis.
//
// Coherences carry their free evolution exp((-i w_ij - gamma_ij) t) exactly
// (integrating-factor RK4); populations and the field term go through RK4.
// Parity sectors are propagated independently when the input allows it.

#include "isomctl/bath.hpp"
#include "isomctl/field.hpp"
#include "isomctl/model.hpp"

#include <Eigen/Dense>

#include <complex>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace isomctl {

class PropagationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DensityMatrix {
  Eigen::MatrixXcd rho;
  double time = 0.0;  // fs

  double trace() const { return rho.diagonal().real().sum(); }
  Eigen::VectorXd populations() const { return rho.diagonal().real(); }
  /// sum_{i != j} |rho_ij|^2
  double coherence_norm() const;
  double hermiticity_error() const;
};

DensityMatrix thermal_state(const Eigen::VectorXd& energies, double temperature);
DensityMatrix thermal_state(const EigenSystem& es, double temperature);

enum class Coupling { Exact, Rwa };
const char* to_string(Coupling c);

struct PropagatorOptions {
  Coupling coupling = Coupling::Rwa;
  double dt = 1.0;                  // fs, RK4 step while the field is on
  double rwa_cutoff = 3000.0;       // cm^-1, keep pairs with ||w_ij| - omega0| <= cutoff
  double rwa_carrier = 25000.0;     // cm^-1
  double field_threshold = 5e-6;    // MV/m; field counts as exhausted below this
  double trace_tolerance = 1e-6;    // per step
  double stride_field = 10.0;       // fs between samples while the field is on
  double stride_free = 100.0;       // fs between samples afterwards
  bool use_parity = true;
  bool parallel_sectors = false;  // one thread per parity sector inside a step

  void validate() const;
};

/// Energies, dipoles and labels the propagator needs; built from an EigenSystem or by hand.
struct SystemView {
  Eigen::VectorXd energies;  // cm^-1
  Eigen::MatrixXd dipole;    // Debye
  std::vector<Parity> parity;
  std::vector<StateLabel> labels;

  static SystemView from(const EigenSystem& es);
  int size() const { return static_cast<int>(energies.size()); }
};

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<double> p_trans, p_cis, p_e;
  std::vector<double> coherence;
  std::vector<double> field;
  double initial_trans = 0.0, initial_cis = 0.0;
  double final_trans = 0.0, final_cis = 0.0, final_e = 0.0;
  double max_pe = 0.0;
  double max_trace_error = 0.0;
  double min_population = 0.0;
  double pulse_area = 0.0;  // filled by the caller
  double fast_path_time = -1.0;  // fs at which the field-free path took over
  long field_steps = 0;
  DensityMatrix final_state;

  double ratio() const { return pulse_area > 0 ? final_cis / pulse_area : 0.0; }
};

enum class ObjectiveKind { CisOverArea, Cis, MinusCisOverArea };
const char* to_string(ObjectiveKind k);
ObjectiveKind parse_objective(const std::string& s);

/// P_cis(T)/area, P_cis(T) or -P_cis(T)/area; ratios are 0 for zero area.
double objective(const TrajectoryRecord& tr, ObjectiveKind kind);

class Propagator {
 public:
  Propagator(SystemView sys, RedfieldTensors tensors, PropagatorOptions opt);
  Propagator(const EigenSystem& es, const RedfieldTensors& tensors, PropagatorOptions opt);

  const PropagatorOptions& options() const { return opt_; }
  const SystemView& system() const { return sys_; }
  const RedfieldTensors& tensors() const { return tensors_; }

  /// Field grid the propagator samples: nodes at dt/2 for node fields.
  TimeGrid field_grid(double t_end) const;

  /// Full run; records samples and switches to the field-free path once the
  /// field is exhausted. Node fields need grid.dt == dt/2, piecewise-constant
  /// fields grid.dt == dt.
  TrajectoryRecord propagate(const DensityMatrix& rho0, const SampledField& f, double t_final) const;

  /// One RK4 step from rho at time t with the three stage field values
  /// (real field in EXACT mode, complex rotating-frame amplitude in RWA mode).
  DensityMatrix step(const DensityMatrix& rho, const std::complex<double> (&e)[3]) const;

  // Sector-level interface used by the optimal-control sweeps.
  struct Sector;
  struct State {
    std::vector<Eigen::MatrixXd> re, im;  // one pair per sector
    double time = 0.0;
    bool full = false;  // single unsplit sector
  };
  struct Workspace;

  /// Splits rho into parity sectors when it has no cross-parity coherence.
  State to_state(const DensityMatrix& rho) const;
  DensityMatrix to_density(const State& s) const;
  /// Advances s by dt; adjoint = backward-time costate generator (s.time decreases).
  void advance(State& s, const std::complex<double> (&e)[3], bool adjoint, Workspace& ws) const;
  /// Exact transpose of advance(): lambda_k = Phi_k^dagger lambda_{k+1}; time decreases by dt.
  void adjoint_step(State& lambda, const std::complex<double> (&e)[3], Workspace& ws) const;
  /// Free evolution over dt/2 applied to every sector (conjugate factors when adjoint).
  void half_step_free(State& s, bool adjoint, Workspace& ws) const;
  /// Re Tr(a^dagger b) summed over sectors.
  static double overlap(const State& a, const State& b);
  /// dJ/dE = Tr(lambda * i kappa [mu, rho]) in 1/(MV/m fs); EXACT coupling only.
  double field_gradient(const State& lambda, const State& rho, Workspace& ws) const;
  std::shared_ptr<Workspace> make_workspace(bool full = false) const;
  /// Populations after field-free evolution for duration dt (forward or transposed generator).
  Eigen::VectorXd relax_populations(const Eigen::VectorXd& p, double duration, bool adjoint = false) const;

  double sum_over(const Eigen::VectorXd& p, StateLabel label) const;
  int sector_count() const;

  ~Propagator();
  Propagator(Propagator&&) noexcept;
  Propagator& operator=(Propagator&&) noexcept;

 private:
  struct SectorWork;
  void build_sectors(bool parity_split);
  bool state_fits_sectors(const DensityMatrix& rho) const;
  template <class Fn>
  void run_sectors(std::size_t n, Fn&& fn) const;
  const std::vector<Sector>& sectors(bool full) const { return full ? full_sector_ : sectors_; }
  std::complex<double> stage_value(const SampledField& f, std::size_t idx) const;
  void derivative(const Sector& s, const Eigen::MatrixXd& xr, const Eigen::MatrixXd& xi,
                  std::complex<double> e, bool adjoint, SectorWork& work, Eigen::MatrixXd& outr,
                  Eigen::MatrixXd& outi) const;

  SystemView sys_;
  RedfieldTensors tensors_;
  PropagatorOptions opt_;
  Eigen::MatrixXd rate_;
  Eigen::MatrixXd relax_stride_;
  std::vector<Sector> sectors_;
  std::vector<Sector> full_sector_;  // fallback without parity split
};

/// Constrained-field run in RWA coupling with the pulse area from the literal
/// real field sampled at area_dt.
TrajectoryRecord run_constrained(const Propagator& prop, const FieldSpec& spec, double mu_ge,
                                 double temperature, double t_final, double area_dt = 0.02);

}  // namespace isomctl
