#include "isomctl/bath.hpp"

#include "isomctl/units.hpp"

#include <cmath>
#include <string>

namespace isomctl {

void BathSpec::validate() const {
  if (!(eta > 0)) throw BathError("bath.eta: must be > 0");
  if (!(omega_c > 0)) throw BathError("bath.omega_c: must be > 0");
  if (!(temperature > 0)) throw BathError("bath.temperature: must be > 0");
  if (!(rate_scale >= 0)) throw BathError("bath.rate_scale: must be >= 0");
}

double spectral_density(double omega, const BathSpec& bath) {
  if (omega < 0) throw BathError("spectral_density: negative frequency " + std::to_string(omega));
  return bath.eta * omega * std::exp(-omega / bath.omega_c);
}

double bose_occupation(double omega, double temperature) {
  return 1.0 / std::expm1(omega / units::thermal_energy(temperature));
}

double one_sided_rate(double omega, const BathSpec& bath) {
  const double kt = units::thermal_energy(bath.temperature);
  double w;
  if (omega > 0) {
    w = spectral_density(omega, bath) * (bose_occupation(omega, bath.temperature) + 1.0);
  } else if (omega < 0) {
    w = spectral_density(-omega, bath) * bose_occupation(-omega, bath.temperature);
  } else {
    w = bath.eta * kt;
  }
  return w * units::kWavenumberToAngular;
}

Eigen::MatrixXd RedfieldTensors::rate_matrix() const {
  Eigen::MatrixXd r = w;
  r.diagonal() = -out_rate;
  return r;
}

RedfieldTensors build_tensors(const Eigen::VectorXd& energies, const Eigen::MatrixXd& coupling,
                              const BathSpec& bath) {
  bath.validate();
  const int n = static_cast<int>(energies.size());
  RedfieldTensors t;
  t.w.setZero(n, n);
  t.gamma.setZero(n, n);
  t.w0 = bath.rate_scale * one_sided_rate(0.0, bath);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double q = coupling(j, i);
      if (q == 0.0) continue;
      t.w(j, i) = bath.rate_scale * q * q * one_sided_rate(energies(i) - energies(j), bath);
    }
  }
  t.out_rate = t.w.colwise().sum().transpose();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double dq = coupling(i, i) - coupling(j, j);
      const double g = 0.5 * (t.out_rate(i) + t.out_rate(j)) + 0.5 * dq * dq * t.w0;
      t.gamma(i, j) = g;
      t.gamma(j, i) = g;
    }
  }
  return t;
}

RedfieldTensors build_tensors(const EigenSystem& es, const BathSpec& bath) {
  return build_tensors(es.energies, es.coupling, bath);
}

Eigen::VectorXd gibbs_populations(const Eigen::VectorXd& energies, double temperature) {
  const double kt = units::thermal_energy(temperature);
  const double e0 = energies.minCoeff();
  Eigen::VectorXd p = (-(energies.array() - e0) / kt).exp();
  return p / p.sum();
}

}  // namespace isomctl
