#pragma once

// Two-surface torsional model: Hamiltonian on a periodic phi grid, its
// eigenstates, and the trans / cis / excited classification.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace isomctl {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelSpec {
  double inertia = 5.0;        // amu * Angstrom^2
  double a0 = 15900.0;         // cm^-1, V_g = a0 (1 - cos phi)
  double a1 = 17500.0;         // cm^-1, V_e = a1 + a2 cos phi
  double a2 = 7500.0;          // cm^-1
  double v_eg = 1000.0;        // cm^-1, constant diabatic coupling
  double mu_ge = 10.0;         // Debye, constant transition dipole
  int n_grid = 256;            // grid points per surface
  int n_basis = 300;           // retained eigenstates (ignored when e_max is set)
  std::optional<double> e_max; // cm^-1, retain every state with lambda <= e_max
  double temperature = 300.0;  // K
  int trans_count = 49;
  int cis_count = 23;

  /// Throws ModelError naming the offending field.
  void validate() const;
};

std::uint64_t hash(const ModelSpec& spec);

/// Dense 2N x 2N Hamiltonian on the periodic grid. Row/column layout is
/// [g(phi_0) .. g(phi_{N-1}), e(phi_0) .. e(phi_{N-1})].
struct GridOperator {
  int n_grid = 0;
  Eigen::VectorXd phi;
  Eigen::VectorXd v_g;
  Eigen::VectorXd v_e;
  double v_eg = 0.0;
  double rotational_constant = 0.0;  // hbar^2 / 2m in cm^-1
  Eigen::MatrixXd matrix;
};

/// Periodic Fourier-grid kinetic matrix B * (-d^2/dphi^2) for even n.
Eigen::MatrixXd fourier_kinetic_matrix(int n, double rotational_constant);

GridOperator build_hamiltonian(const ModelSpec& spec);

enum class StateLabel { Trans, Cis, Excited };
enum class Parity { Even, Odd, None };

const char* to_string(StateLabel label);
const char* to_string(Parity parity);

struct EigenSystem {
  ModelSpec spec;
  int n_grid = 0;
  Eigen::VectorXd energies;      // cm^-1, ascending
  Eigen::MatrixXd vectors;       // 2 n_grid x n, orthonormal columns
  Eigen::MatrixXd dipole;        // mu_ij, Debye
  Eigen::MatrixXd coupling;      // Q_ij = <i|cos phi|j>
  Eigen::VectorXd ground_weight; // weight on the lower adiabatic surface
  Eigen::VectorXd cos_phi;       // <i|cos phi|i>
  std::vector<Parity> parity;
  std::vector<StateLabel> labels;
  std::vector<int> trans;
  std::vector<int> cis;
  std::vector<int> excited;

  int size() const { return static_cast<int>(energies.size()); }
  bool classified() const { return !labels.empty(); }
};

/// Eigenpairs sorted ascending and truncated per spec; labels left empty.
/// Parity-symmetric operators are diagonalized in even/odd blocks.
EigenSystem diagonalize(const GridOperator& h, const ModelSpec& spec);

/// Labels TRANS / CIS / EXCITED; throws ModelError when too few candidates exist.
EigenSystem classify_states(EigenSystem es);

/// build_hamiltonian + diagonalize + classify_states.
EigenSystem build_eigensystem(const ModelSpec& spec);

/// Lowest Nyquist-adequate power-of-two grid for states up to energy e_top.
int required_grid_size(double e_top, double rotational_constant);

// Binary cache, keyed by hash(spec).
void save_eigensystem(const std::filesystem::path& path, const EigenSystem& es);
std::optional<EigenSystem> load_eigensystem(const std::filesystem::path& path,
                                            const ModelSpec& spec);

}  // namespace isomctl
