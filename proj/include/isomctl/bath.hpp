#pragma once

// Ohmic bath and secular Redfield rate tensors in the eigenbasis.

#include "isomctl/model.hpp"

#include <Eigen/Dense>

#include <stdexcept>

namespace isomctl {

class BathError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct BathSpec {
  double eta = 5.0;          // dimensionless
  double omega_c = 450.0;    // cm^-1
  double temperature = 300.0;  // K
  double rate_scale = 1.0;   // multiplies every w and gamma (slow-relaxation variants)

  void validate() const;
};

/// J(w) = eta w exp(-w/w_c), w >= 0 in cm^-1; result in cm^-1.
double spectral_density(double omega, const BathSpec& bath);

/// Bose occupation 1/(exp(w/kT) - 1), w > 0 in cm^-1.
double bose_occupation(double omega, double temperature);

/// W(w) in fs^-1: J(w)(n+1) for w > 0, J(-w) n(-w) for w < 0, eta kT at w = 0.
double one_sided_rate(double omega, const BathSpec& bath);

struct RedfieldTensors {
  Eigen::MatrixXd w;      // w(j, i): rate i -> j, fs^-1, zero diagonal
  Eigen::MatrixXd gamma;  // gamma(i, j), fs^-1, zero diagonal
  Eigen::VectorXd out_rate;  // sum_j w(j, i)
  double w0 = 0.0;        // W(0), fs^-1

  int size() const { return static_cast<int>(w.rows()); }
  /// Population generator: dp/dt = R p.
  Eigen::MatrixXd rate_matrix() const;
};

RedfieldTensors build_tensors(const Eigen::VectorXd& energies, const Eigen::MatrixXd& coupling,
                              const BathSpec& bath);
RedfieldTensors build_tensors(const EigenSystem& es, const BathSpec& bath);

/// Gibbs populations exp(-lambda/kT), normalized.
Eigen::VectorXd gibbs_populations(const Eigen::VectorXd& energies, double temperature);

}  // namespace isomctl
