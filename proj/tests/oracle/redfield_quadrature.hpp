#pragma once

// Brute-force evaluation of the Redfield relaxation integrals.
//
// Re Gamma+_{kijl} = (1/2pi) Q_lj Q_ik Re int_0^inf dtau exp(-eps tau)
//                    int_0^inf dw J(w) {(n(w)+1) e^{-i(w_ik+w)tau} + n(w) e^{-i(w_ik-w)tau}}
//
// The bath correlation function is built on a tau grid by summing phasors
// over a uniform frequency grid, then the tau integral is done by the
// trapezoid rule for four convergence factors and extrapolated to eps -> 0
// with the form a + b eps ln(eps) + c eps + d eps^2 (the spectral density has
// a kink at zero frequency, which leaves an eps ln(eps) term).
// Independent of the library's closed forms; only constants are shared.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <vector>

namespace oracle {

struct QuadratureBath {
  double eta = 5.0;
  double omega_c = 450.0;   // cm^-1
  double temperature = 300.0;
};

class RedfieldQuadrature {
 public:
  explicit RedfieldQuadrature(const QuadratureBath& b) : bath_(b) {
    const double c = 299792458.0 * 1e2 * 1e-15;
    to_rad_ = 2.0 * M_PI * c;
    const double kt = 1.380649e-23 / (6.62607015e-34 * 299792458.0 * 1e2) * b.temperature;
    const double wc = b.omega_c * to_rad_;
    const double w_max = 20.0 * wc;
    const double dw = 1.0e-4;
    const int nw = static_cast<int>(w_max / dw);
    const double dtau = 0.25;
    const double tau_max = 24000.0;
    nt_ = static_cast<int>(tau_max / dtau) + 1;
    dtau_ = dtau;
    corr_.assign(nt_, {0.0, 0.0});
    // C(tau) = int dw J(w) [(n+1) e^{-i w tau} + n e^{+i w tau}]
    std::vector<double> jre(nw), jim(nw);
    std::vector<std::complex<double>> z(nw, {1.0, 0.0}), rot(nw);
    for (int m = 0; m < nw; ++m) {
      const double w = (m + 0.5) * dw;  // midpoint rule in w
      const double j = b.eta * w * std::exp(-w / wc);
      const double n = 1.0 / std::expm1(w / (kt * to_rad_));
      jre[m] = j * (2.0 * n + 1.0) * dw;  // cos part
      jim[m] = -j * dw;                   // sin part: (n+1)(-i) + n(+i) = -i
      rot[m] = std::polar(1.0, w * dtau);
    }
    for (int t = 0; t < nt_; ++t) {
      double re = 0.0, im = 0.0;
      for (int m = 0; m < nw; ++m) {
        re += jre[m] * z[m].real();
        im += jim[m] * z[m].imag();
        z[m] *= rot[m];
      }
      corr_[t] = {re, im};
      if (t % 512 == 511) {
        for (auto& v : z) v /= std::abs(v);
      }
    }
  }

  /// Re of the integral (1/2pi) int dtau e^{-i x tau} C(tau), x = w_ik in cm^-1; result in fs^-1.
  double half_rate(double x_wavenumber) const {
    const double x = x_wavenumber * to_rad_;
    auto at = [&](double eps) {
      double acc = 0.0;
      for (int t = 0; t < nt_; ++t) {
        const double tau = t * dtau_;
        const std::complex<double> v = std::polar(std::exp(-eps * tau), -x * tau) * corr_[t];
        acc += (t == 0 || t == nt_ - 1 ? 0.5 : 1.0) * v.real();
      }
      return acc * dtau_ / (2.0 * M_PI);
    };
    const double eps[4] = {0.5e-3, 1.0e-3, 2.0e-3, 4.0e-3};
    Eigen::Matrix4d m;
    Eigen::Vector4d v;
    for (int k = 0; k < 4; ++k) {
      m(k, 0) = 1.0;
      m(k, 1) = eps[k] * std::log(eps[k]);
      m(k, 2) = eps[k];
      m(k, 3) = eps[k] * eps[k];
      v(k) = at(eps[k]);
    }
    return m.fullPivLu().solve(v)(0);
  }

  /// w(j, i) = 2 Re Gamma+_{ijji}, rate i -> j.
  Eigen::MatrixXd rates(const Eigen::VectorXd& energies, const Eigen::MatrixXd& q) const {
    const int n = static_cast<int>(energies.size());
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        w(j, i) = 2.0 * q(j, i) * q(i, j) * half_rate(energies(j) - energies(i));
      }
    }
    return w;
  }

  /// gamma_ij = sum_k (Re G+_ikki + Re G-_jkkj) - Re G+_jjii - Re G-_jjii.
  Eigen::MatrixXd dephasing(const Eigen::VectorXd& energies, const Eigen::MatrixXd& q) const {
    const int n = static_cast<int>(energies.size());
    // g(a, b) = Re Gamma+_{abba} = Q_ab Q_ba half_rate(w_ba)
    Eigen::MatrixXd g(n, n);
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) g(a, b) = q(a, b) * q(b, a) * half_rate(energies(b) - energies(a));
    }
    const double zero = half_rate(0.0);
    Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        double s = 0.0;
        for (int k = 0; k < n; ++k) s += g(i, k) + g(j, k);
        gamma(i, j) = s - 2.0 * q(i, i) * q(j, j) * zero;
      }
    }
    return gamma;
  }

 private:
  QuadratureBath bath_;
  double to_rad_ = 0.0;
  double dtau_ = 0.0;
  int nt_ = 0;
  std::vector<std::complex<double>> corr_;
};

/// Four-level toy with dense coupling and distinct diagonal elements.
inline void toy_system(Eigen::VectorXd& energies, Eigen::MatrixXd& q) {
  energies.resize(4);
  energies << 0.0, 310.0, 1180.0, 2050.0;
  q.resize(4, 4);
  q << 0.90, 0.30, 0.12, 0.05,
       0.30, 0.40, 0.25, 0.10,
       0.12, 0.25, -0.20, 0.35,
       0.05, 0.10, 0.35, -0.70;
}

}  // namespace oracle
