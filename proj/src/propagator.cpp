#include "isomctl/propagator.hpp"

#include "isomctl/simd.hpp"
#include "isomctl/units.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

namespace isomctl {

namespace {

constexpr double kKappa = units::kDebyeMVPerMToWavenumber * units::kWavenumberToAngular;  // rad/fs per D MV/m

void hermitize(Eigen::MatrixXd& re, Eigen::MatrixXd& im) {
  const Eigen::Index n = re.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    im(j, j) = 0.0;
    for (Eigen::Index i = 0; i < j; ++i) {
      const double r = 0.5 * (re(i, j) + re(j, i));
      const double m = 0.5 * (im(i, j) - im(j, i));
      re(i, j) = r;
      re(j, i) = r;
      im(i, j) = m;
      im(j, i) = -m;
    }
  }
}

}  // namespace

double DensityMatrix::coherence_norm() const {
  return rho.cwiseAbs2().sum() - rho.diagonal().cwiseAbs2().sum();
}

double DensityMatrix::hermiticity_error() const { return (rho - rho.adjoint()).cwiseAbs().maxCoeff(); }

DensityMatrix thermal_state(const Eigen::VectorXd& energies, double temperature) {
  if (!(temperature > 0)) throw PropagationError("thermal_state: temperature must be > 0");
  DensityMatrix d;
  d.rho = Eigen::MatrixXcd::Zero(energies.size(), energies.size());
  d.rho.diagonal() = gibbs_populations(energies, temperature).cast<std::complex<double>>();
  return d;
}

DensityMatrix thermal_state(const EigenSystem& es, double temperature) {
  return thermal_state(es.energies, temperature);
}

const char* to_string(Coupling c) { return c == Coupling::Exact ? "exact" : "rwa"; }

const char* to_string(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::CisOverArea: return "CIS_OVER_AREA";
    case ObjectiveKind::Cis: return "CIS";
    case ObjectiveKind::MinusCisOverArea: return "MINUS_CIS_OVER_AREA";
  }
  return "?";
}

ObjectiveKind parse_objective(const std::string& s) {
  if (s == "CIS_OVER_AREA") return ObjectiveKind::CisOverArea;
  if (s == "CIS") return ObjectiveKind::Cis;
  if (s == "MINUS_CIS_OVER_AREA") return ObjectiveKind::MinusCisOverArea;
  throw std::invalid_argument("unknown objective '" + s + "' (CIS_OVER_AREA, CIS, MINUS_CIS_OVER_AREA)");
}

double objective(const TrajectoryRecord& tr, ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::Cis: return tr.final_cis;
    case ObjectiveKind::CisOverArea: return tr.ratio();
    case ObjectiveKind::MinusCisOverArea: return -tr.ratio();
  }
  return 0.0;
}

void PropagatorOptions::validate() const {
  if (!(dt > 0)) throw PropagationError("propagator.dt: must be > 0");
  if (!(rwa_cutoff > 0)) throw PropagationError("propagator.rwa_cutoff: must be > 0");
  if (!(stride_field > 0) || !(stride_free > 0)) throw PropagationError("propagator strides must be > 0");
  if (!(field_threshold >= 0)) throw PropagationError("propagator.field_threshold: must be >= 0");
}

SystemView SystemView::from(const EigenSystem& es) {
  SystemView v;
  v.energies = es.energies;
  v.dipole = es.dipole;
  v.parity = es.parity;
  v.labels = es.labels;
  if (v.labels.empty()) v.labels.assign(es.size(), StateLabel::Excited);
  return v;
}

struct Propagator::Sector {
  std::vector<int> idx;
  int n = 0;
  Eigen::MatrixXd fh_re, fh_im, ff_re, ff_im;  // forward factors over dt/2 and dt
  Eigen::MatrixXd mu;
  Eigen::MatrixXd rate, rate_t;
  int u_begin = 0, l_end = 0;
  Eigen::MatrixXd m_up, m_up_t;  // RWA block, rows u_begin.., cols ..l_end
  Eigen::MatrixXd omega, gamma;  // rad/fs, fs^-1
};

struct Propagator::SectorWork {
  Eigen::MatrixXd k1r, k1i, k2r, k2i, k3r, k3i, k4r, k4i;
  Eigen::MatrixXd ar, ai, fr, fi, outr, outi;
  Eigen::MatrixXd xr, xi, cr, ci, br, bi;
  Eigen::MatrixXd fh_adj, ff_adj;  // conjugated imaginary parts
};

struct Propagator::Workspace {
  std::vector<SectorWork> w;
};

Propagator::Propagator(SystemView sys, RedfieldTensors tensors, PropagatorOptions opt)
    : sys_(std::move(sys)), tensors_(std::move(tensors)), opt_(opt) {
  opt_.validate();
  const int n = sys_.size();
  if (sys_.dipole.rows() != n || sys_.dipole.cols() != n || tensors_.size() != n) {
    throw PropagationError("propagator: system and tensor dimensions disagree");
  }
  if (static_cast<int>(sys_.parity.size()) != n) sys_.parity.assign(n, Parity::None);
  if (static_cast<int>(sys_.labels.size()) != n) sys_.labels.assign(n, StateLabel::Excited);
  rate_ = tensors_.rate_matrix();
  relax_stride_ = (rate_ * opt_.stride_free).exp();
  build_sectors(opt_.use_parity);
}

Propagator::Propagator(const EigenSystem& es, const RedfieldTensors& tensors, PropagatorOptions opt)
    : Propagator(SystemView::from(es), tensors, opt) {}

Propagator::~Propagator() = default;
Propagator::Propagator(Propagator&&) noexcept = default;
Propagator& Propagator::operator=(Propagator&&) noexcept = default;

void Propagator::build_sectors(bool parity_split) {
  const int n = sys_.size();
  auto make = [&](const std::vector<int>& idx) {
    Sector s;
    s.idx = idx;
    s.n = static_cast<int>(idx.size());
    const int m = s.n;
    s.mu.resize(m, m);
    s.rate.resize(m, m);
    s.omega.resize(m, m);
    s.gamma.resize(m, m);
    for (int b = 0; b < m; ++b) {
      for (int a = 0; a < m; ++a) {
        const int i = idx[a], j = idx[b];
        s.mu(a, b) = sys_.dipole(i, j);
        s.rate(a, b) = rate_(i, j);
        s.omega(a, b) = (sys_.energies(i) - sys_.energies(j)) * units::kWavenumberToAngular;
        s.gamma(a, b) = a == b ? 0.0 : tensors_.gamma(i, j);
      }
    }
    s.rate_t = s.rate.transpose();
    auto factors = [&](double h, Eigen::MatrixXd& re, Eigen::MatrixXd& im) {
      re.resize(m, m);
      im.resize(m, m);
      for (int b = 0; b < m; ++b) {
        for (int a = 0; a < m; ++a) {
          if (a == b) {
            re(a, b) = 1.0;
            im(a, b) = 0.0;
            continue;
          }
          const double mag = std::exp(-s.gamma(a, b) * h);
          re(a, b) = mag * std::cos(s.omega(a, b) * h);
          im(a, b) = -mag * std::sin(s.omega(a, b) * h);
        }
      }
    };
    factors(0.5 * opt_.dt, s.fh_re, s.fh_im);
    factors(opt_.dt, s.ff_re, s.ff_im);

    // Resonant upper <- lower block for the rotating-wave coupling.
    int ub = m, le = 0;
    for (int b = 0; b < m; ++b) {
      for (int a = 0; a < m; ++a) {
        const double w = sys_.energies(idx[a]) - sys_.energies(idx[b]);
        if (w > 0 && std::abs(w - opt_.rwa_carrier) <= opt_.rwa_cutoff && s.mu(a, b) != 0.0) {
          ub = std::min(ub, a);
          le = std::max(le, b + 1);
        }
      }
    }
    if (ub >= m || le == 0) {
      s.u_begin = m;
      s.l_end = 0;
      s.m_up.resize(0, 0);
    } else {
      s.u_begin = ub;
      s.l_end = le;
      s.m_up.setZero(m - ub, le);
      for (int b = 0; b < le; ++b) {
        for (int a = ub; a < m; ++a) {
          const double w = sys_.energies(idx[a]) - sys_.energies(idx[b]);
          if (w > 0 && std::abs(w - opt_.rwa_carrier) <= opt_.rwa_cutoff) s.m_up(a - ub, b) = s.mu(a, b);
        }
      }
    }
    s.m_up_t = s.m_up.transpose();
    return s;
  };

  std::vector<int> all(n);
  for (int i = 0; i < n; ++i) all[i] = i;
  full_sector_.clear();
  full_sector_.push_back(make(all));

  sectors_.clear();
  bool has_parity = parity_split;
  for (auto p : sys_.parity) has_parity = has_parity && p != Parity::None;
  if (has_parity) {
    std::vector<int> even, odd;
    for (int i = 0; i < n; ++i) (sys_.parity[i] == Parity::Even ? even : odd).push_back(i);
    if (!even.empty()) sectors_.push_back(make(even));
    if (!odd.empty()) sectors_.push_back(make(odd));
  } else {
    sectors_ = full_sector_;
  }
}

bool Propagator::state_fits_sectors(const DensityMatrix& rho) const {
  if (sectors_.size() == 1) return true;
  const int n = sys_.size();
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      if (sys_.parity[i] != sys_.parity[j] && std::abs(rho.rho(i, j)) != 0.0) return false;
    }
  }
  return true;
}

Propagator::State Propagator::to_state(const DensityMatrix& rho) const {
  if (rho.rho.rows() != sys_.size() || rho.rho.cols() != sys_.size()) {
    throw PropagationError("density matrix dimension does not match the basis");
  }
  State s;
  s.time = rho.time;
  s.full = !state_fits_sectors(rho);
  for (const auto& sec : sectors(s.full)) {
    Eigen::MatrixXd re(sec.n, sec.n), im(sec.n, sec.n);
    for (int b = 0; b < sec.n; ++b) {
      for (int a = 0; a < sec.n; ++a) {
        const auto v = rho.rho(sec.idx[a], sec.idx[b]);
        re(a, b) = v.real();
        im(a, b) = v.imag();
      }
    }
    s.re.push_back(std::move(re));
    s.im.push_back(std::move(im));
  }
  return s;
}

DensityMatrix Propagator::to_density(const State& s) const {
  DensityMatrix d;
  d.time = s.time;
  d.rho = Eigen::MatrixXcd::Zero(sys_.size(), sys_.size());
  const auto& secs = sectors(s.full);
  for (std::size_t k = 0; k < secs.size(); ++k) {
    const auto& sec = secs[k];
    for (int b = 0; b < sec.n; ++b) {
      for (int a = 0; a < sec.n; ++a) d.rho(sec.idx[a], sec.idx[b]) = {s.re[k](a, b), s.im[k](a, b)};
    }
  }
  return d;
}

std::shared_ptr<Propagator::Workspace> Propagator::make_workspace(bool full) const {
  auto ws = std::make_shared<Workspace>();
  for (const auto& sec : sectors(full)) {
    SectorWork w;
    const int m = sec.n;
    for (auto* x : {&w.k1r, &w.k1i, &w.k2r, &w.k2i, &w.k3r, &w.k3i, &w.k4r, &w.k4i, &w.ar, &w.ai, &w.fr,
                    &w.fi, &w.outr, &w.outi, &w.xr, &w.xi, &w.cr, &w.ci}) {
      x->setZero(m, m);
    }
    w.br.setZero(sec.l_end, m);
    w.bi.setZero(sec.l_end, m);
    w.fh_adj = -sec.fh_im;
    w.ff_adj = -sec.ff_im;
    ws->w.push_back(std::move(w));
  }
  return ws;
}

void Propagator::derivative(const Sector& s, const Eigen::MatrixXd& xr, const Eigen::MatrixXd& xi,
                            std::complex<double> e, bool adjoint, SectorWork& w, Eigen::MatrixXd& outr,
                            Eigen::MatrixXd& outi) const {
  if (adjoint) e = -e;
  if (e == std::complex<double>(0.0, 0.0)) {
    outr.setZero();
    outi.setZero();
  } else if (opt_.coupling == Coupling::Exact) {
    const double c = kKappa * e.real();
    const std::size_t m = static_cast<std::size_t>(s.n);
    const auto& K = simd::kernels();
    K.gemm(m, m, m, s.mu.data(), m, xr.data(), m, w.cr.data(), m);
    K.gemm(m, m, m, s.mu.data(), m, xi.data(), m, w.ci.data(), m);
    outr = -c * (w.ci + w.ci.transpose());
    outi = c * (w.cr - w.cr.transpose());
  } else {
    w.xr.setZero();
    w.xi.setZero();
    if (s.l_end > 0) {
      const int m = s.n, ub = s.u_begin, le = s.l_end, nu = m - ub;
      const double er = 0.5 * e.real(), ei = 0.5 * e.imag();
      // A = M_up rho[L, :] lands in rows U; B = M_up^T rho[U, :] lands in rows L.
      const auto& K = simd::kernels();
      const std::size_t ms = static_cast<std::size_t>(m);
      // cr, ci hold nu x m products with leading dimension nu.
      K.gemm(nu, ms, le, s.m_up.data(), nu, xr.data(), ms, w.cr.data(), nu);
      K.gemm(nu, ms, le, s.m_up.data(), nu, xi.data(), ms, w.ci.data(), nu);
      K.gemm(le, ms, nu, s.m_up_t.data(), le, xr.data() + ub, ms, w.br.data(), le);
      K.gemm(le, ms, nu, s.m_up_t.data(), le, xi.data() + ub, ms, w.bi.data(), le);
      const Eigen::Map<const Eigen::MatrixXd> ar(w.cr.data(), nu, m), ai(w.ci.data(), nu, m);
      w.xr.bottomRows(nu) += er * ar - ei * ai;
      w.xi.bottomRows(nu) += er * ai + ei * ar;
      w.xr.topRows(le) += er * w.br + ei * w.bi;
      w.xi.topRows(le) += er * w.bi - ei * w.br;
    }
    outr = -kKappa * (w.xi + w.xi.transpose());
    outi = kKappa * (w.xr - w.xr.transpose());
  }
  const Eigen::VectorXd p = xr.diagonal();
  if (adjoint) {
    outr.diagonal().noalias() += s.rate_t * p;
  } else {
    outr.diagonal().noalias() += s.rate * p;
  }
}

template <class Fn>
void Propagator::run_sectors(std::size_t n, Fn&& fn) const {
  if (!opt_.parallel_sectors || n < 2) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(n - 1);
  for (std::size_t k = 1; k < n; ++k) pool.emplace_back([&fn, k] { fn(k); });
  fn(0);
  for (auto& t : pool) t.join();
}

void Propagator::advance(State& st, const std::complex<double> (&e)[3], bool adjoint, Workspace& ws) const {
  const auto& secs = sectors(st.full);
  const auto& K = simd::kernels();
  const double h = opt_.dt;
  run_sectors(secs.size(), [&](std::size_t k) {
    const Sector& s = secs[k];
    SectorWork& w = ws.w[k];
    Eigen::MatrixXd& rr = st.re[k];
    Eigen::MatrixXd& ri = st.im[k];
    const std::size_t n2 = static_cast<std::size_t>(s.n) * s.n;
    const double* fhr = s.fh_re.data();
    const double* fhi = adjoint ? w.fh_adj.data() : s.fh_im.data();
    const double* ffr = s.ff_re.data();
    const double* ffi = adjoint ? w.ff_adj.data() : s.ff_im.data();

    derivative(s, rr, ri, e[0], adjoint, w, w.k1r, w.k1i);
    K.axpy(n2, 0.5 * h, w.k1r.data(), rr.data(), w.ar.data());
    K.axpy(n2, 0.5 * h, w.k1i.data(), ri.data(), w.ai.data());
    K.cmul_axpy(n2, 1.0, fhr, fhi, w.ar.data(), w.ai.data(), nullptr, nullptr, w.ar.data(), w.ai.data());
    derivative(s, w.ar, w.ai, e[1], adjoint, w, w.k2r, w.k2i);

    K.cmul_axpy(n2, 1.0, fhr, fhi, rr.data(), ri.data(), nullptr, nullptr, w.fr.data(), w.fi.data());
    K.axpy(n2, 0.5 * h, w.k2r.data(), w.fr.data(), w.ar.data());
    K.axpy(n2, 0.5 * h, w.k2i.data(), w.fi.data(), w.ai.data());
    derivative(s, w.ar, w.ai, e[1], adjoint, w, w.k3r, w.k3i);

    K.cmul_axpy(n2, 1.0, ffr, ffi, rr.data(), ri.data(), nullptr, nullptr, w.fr.data(), w.fi.data());
    K.cmul_axpy(n2, h, fhr, fhi, w.k3r.data(), w.k3i.data(), w.fr.data(), w.fi.data(), w.ar.data(), w.ai.data());
    derivative(s, w.ar, w.ai, e[2], adjoint, w, w.k4r, w.k4i);

    K.cmul_axpy(n2, h / 6.0, ffr, ffi, w.k1r.data(), w.k1i.data(), w.fr.data(), w.fi.data(), rr.data(), ri.data());
    K.axpy(n2, 1.0, w.k3r.data(), w.k2r.data(), w.k2r.data());
    K.axpy(n2, 1.0, w.k3i.data(), w.k2i.data(), w.k2i.data());
    K.cmul_axpy(n2, h / 3.0, fhr, fhi, w.k2r.data(), w.k2i.data(), rr.data(), ri.data(), rr.data(), ri.data());
    K.axpy(n2, h / 6.0, w.k4r.data(), rr.data(), rr.data());
    K.axpy(n2, h / 6.0, w.k4i.data(), ri.data(), ri.data());
    hermitize(rr, ri);
  });
  st.time += adjoint ? -h : h;
}

void Propagator::adjoint_step(State& st, const std::complex<double> (&e)[3], Workspace& ws) const {
  const auto& secs = sectors(st.full);
  const auto& K = simd::kernels();
  const double h = opt_.dt;
  run_sectors(secs.size(), [&](std::size_t k) {
    const Sector& s = secs[k];
    SectorWork& w = ws.w[k];
    Eigen::MatrixXd& lr = st.re[k];
    Eigen::MatrixXd& li = st.im[k];
    const std::size_t n2 = static_cast<std::size_t>(s.n) * s.n;
    const double* fhr = s.fh_re.data();
    const double* fhi = w.fh_adj.data();
    const double* ffr = s.ff_re.data();
    const double* ffi = w.ff_adj.data();
    hermitize(lr, li);
    // Output adjoints of the stage derivatives.
    // k4bar = h/6 L ; k3bar = k2bar = h/3 conj(Fh) L ; k1bar = h/6 conj(F) L ; rhobar = conj(F) L
    K.cmul_axpy(n2, h / 3.0, fhr, fhi, lr.data(), li.data(), nullptr, nullptr, w.k3r.data(), w.k3i.data());
    w.k2r = w.k3r;
    w.k2i = w.k3i;
    K.cmul_axpy(n2, h / 6.0, ffr, ffi, lr.data(), li.data(), nullptr, nullptr, w.k1r.data(), w.k1i.data());
    // c = F rho + h Fh k3, k4 = N(c): cbar = N^dagger(k4bar)
    w.ar = (h / 6.0) * lr;
    w.ai = (h / 6.0) * li;
    derivative(s, w.ar, w.ai, e[2], true, w, w.outr, w.outi);  // cbar
    K.cmul_axpy(n2, 1.0, ffr, ffi, lr.data(), li.data(), nullptr, nullptr, w.fr.data(), w.fi.data());  // rhobar
    K.cmul_axpy(n2, 1.0, ffr, ffi, w.outr.data(), w.outi.data(), w.fr.data(), w.fi.data(), w.fr.data(), w.fi.data());
    K.cmul_axpy(n2, h, fhr, fhi, w.outr.data(), w.outi.data(), w.k3r.data(), w.k3i.data(), w.k3r.data(), w.k3i.data());
    // k3 = N(b): bbar = N^dagger(k3bar); b = Fh rho + h/2 k2
    derivative(s, w.k3r, w.k3i, e[1], true, w, w.outr, w.outi);
    K.cmul_axpy(n2, 1.0, fhr, fhi, w.outr.data(), w.outi.data(), w.fr.data(), w.fi.data(), w.fr.data(), w.fi.data());
    K.axpy(n2, 0.5 * h, w.outr.data(), w.k2r.data(), w.k2r.data());
    K.axpy(n2, 0.5 * h, w.outi.data(), w.k2i.data(), w.k2i.data());
    // k2 = N(a): abar = N^dagger(k2bar); a = Fh (rho + h/2 k1)
    derivative(s, w.k2r, w.k2i, e[1], true, w, w.outr, w.outi);
    K.cmul_axpy(n2, 1.0, fhr, fhi, w.outr.data(), w.outi.data(), nullptr, nullptr, w.ar.data(), w.ai.data());
    K.axpy(n2, 1.0, w.ar.data(), w.fr.data(), w.fr.data());
    K.axpy(n2, 1.0, w.ai.data(), w.fi.data(), w.fi.data());
    K.axpy(n2, 0.5 * h, w.ar.data(), w.k1r.data(), w.k1r.data());
    K.axpy(n2, 0.5 * h, w.ai.data(), w.k1i.data(), w.k1i.data());
    // k1 = N(rho)
    derivative(s, w.k1r, w.k1i, e[0], true, w, w.outr, w.outi);
    K.axpy(n2, 1.0, w.outr.data(), w.fr.data(), lr.data());
    K.axpy(n2, 1.0, w.outi.data(), w.fi.data(), li.data());
    hermitize(lr, li);
  });
  st.time -= h;
}

void Propagator::half_step_free(State& st, bool adjoint, Workspace& ws) const {
  const auto& secs = sectors(st.full);
  const auto& K = simd::kernels();
  for (std::size_t k = 0; k < secs.size(); ++k) {
    const std::size_t n2 = static_cast<std::size_t>(secs[k].n) * secs[k].n;
    const double* fi = adjoint ? ws.w[k].fh_adj.data() : secs[k].fh_im.data();
    K.cmul_axpy(n2, 1.0, secs[k].fh_re.data(), fi, st.re[k].data(), st.im[k].data(), nullptr, nullptr,
                st.re[k].data(), st.im[k].data());
  }
}

double Propagator::overlap(const State& a, const State& b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.re.size(); ++k) {
    acc += a.re[k].cwiseProduct(b.re[k]).sum() + a.im[k].cwiseProduct(b.im[k]).sum();
  }
  return acc;
}

double Propagator::field_gradient(const State& lambda, const State& rho, Workspace& ws) const {
  if (opt_.coupling != Coupling::Exact) throw PropagationError("field gradient needs exact coupling");
  const auto& secs = sectors(rho.full);
  double im_s = 0.0;
  for (std::size_t k = 0; k < secs.size(); ++k) {
    SectorWork& w = ws.w[k];
    const std::size_t m = static_cast<std::size_t>(secs[k].n);
    simd::kernels().gemm(m, m, m, secs[k].mu.data(), m, rho.re[k].data(), m, w.cr.data(), m);
    simd::kernels().gemm(m, m, m, secs[k].mu.data(), m, rho.im[k].data(), m, w.ci.data(), m);
    im_s += (lambda.re[k].cwiseProduct(w.ci) - lambda.im[k].cwiseProduct(w.cr)).sum();
  }
  return -2.0 * kKappa * im_s;
}

Eigen::VectorXd Propagator::relax_populations(const Eigen::VectorXd& p, double duration, bool adjoint) const {
  if (duration <= 0) return p;
  if (std::abs(duration - opt_.stride_free) < 1e-12) {
    return adjoint ? Eigen::VectorXd(relax_stride_.transpose() * p) : Eigen::VectorXd(relax_stride_ * p);
  }
  const Eigen::MatrixXd e = (rate_ * duration).exp();
  return adjoint ? Eigen::VectorXd(e.transpose() * p) : Eigen::VectorXd(e * p);
}

double Propagator::sum_over(const Eigen::VectorXd& p, StateLabel label) const {
  double acc = 0.0;
  for (int i = 0; i < sys_.size(); ++i) {
    if (sys_.labels[i] == label) acc += p(i);
  }
  return acc;
}

int Propagator::sector_count() const { return static_cast<int>(sectors_.size()); }

TimeGrid Propagator::field_grid(double t_end) const { return TimeGrid::covering(0.0, t_end, 0.5 * opt_.dt); }

std::complex<double> Propagator::stage_value(const SampledField& f, std::size_t idx) const {
  if (idx >= f.values.size()) return {0.0, 0.0};
  if (opt_.coupling == Coupling::Exact) return {f.values[idx], 0.0};
  const double t = f.grid.time(idx);
  const double ph = f.carrier * units::kWavenumberToAngular * (t - f.carrier_origin);
  return f.envelope[idx] * std::complex<double>(std::cos(ph), -std::sin(ph));
}

DensityMatrix Propagator::step(const DensityMatrix& rho, const std::complex<double> (&e)[3]) const {
  State s = to_state(rho);
  auto ws = make_workspace(s.full);
  advance(s, e, false, *ws);
  return to_density(s);
}

TrajectoryRecord Propagator::propagate(const DensityMatrix& rho0, const SampledField& f, double t_final) const {
  const double h = opt_.dt;
  const bool has_field = !f.values.empty() && f.provenance != Provenance::Zero;
  const bool pwc = f.piecewise_constant;
  if (has_field) {
    const double want = pwc ? h : 0.5 * h;
    if (std::abs(f.grid.dt - want) > 1e-9 * want) {
      std::ostringstream os;
      os << "field grid dt " << f.grid.dt << " fs does not match propagator step " << h << " fs (need " << want << ")";
      throw PropagationError(os.str());
    }
    if (std::abs(f.grid.t_start - rho0.time) > 1e-9) throw PropagationError("field grid must start at the initial time");
    if (opt_.coupling == Coupling::Rwa && !f.has_envelope()) {
      throw PropagationError("rotating-wave coupling needs a complex-envelope field");
    }
    if (opt_.coupling == Coupling::Rwa && std::abs(f.carrier - opt_.rwa_carrier) > 1e-9) {
      throw PropagationError("field carrier differs from the propagator's rotating-wave carrier");
    }
  }
  if (t_final < rho0.time) throw PropagationError("t_final precedes the initial time");

  State st = to_state(rho0);
  auto ws = make_workspace(st.full);
  const auto& secs = sectors(st.full);
  const int n = sys_.size();

  TrajectoryRecord tr;
  auto populations = [&]() {
    Eigen::VectorXd p(n);
    for (std::size_t k = 0; k < secs.size(); ++k) {
      for (int a = 0; a < secs[k].n; ++a) p(secs[k].idx[a]) = st.re[k](a, a);
    }
    return p;
  };
  auto coherence = [&]() {
    double c = 0.0;
    for (std::size_t k = 0; k < secs.size(); ++k) {
      c += st.re[k].squaredNorm() + st.im[k].squaredNorm() - st.re[k].diagonal().squaredNorm();
    }
    return c;
  };
  auto record = [&](double fval) {
    const Eigen::VectorXd p = populations();
    tr.times.push_back(st.time);
    tr.p_trans.push_back(sum_over(p, StateLabel::Trans));
    tr.p_cis.push_back(sum_over(p, StateLabel::Cis));
    tr.p_e.push_back(sum_over(p, StateLabel::Excited));
    tr.coherence.push_back(coherence());
    tr.field.push_back(fval);
    tr.max_pe = std::max(tr.max_pe, tr.p_e.back());
    tr.min_population = std::min(tr.min_population, p.minCoeff());
  };

  const Eigen::VectorXd p0 = populations();
  tr.initial_trans = sum_over(p0, StateLabel::Trans);
  tr.initial_cis = sum_over(p0, StateLabel::Cis);
  tr.min_population = p0.minCoeff();
  record(has_field ? f.values[0] : 0.0);

  // Field phase.
  std::size_t n_steps = 0;
  std::vector<double> tail_max;
  if (has_field) {
    n_steps = pwc ? f.values.size() : (f.values.size() - 1) / 2;
    const std::size_t ns = f.values.size();
    tail_max.assign(ns + 1, 0.0);
    for (std::size_t k = ns; k-- > 0;) {
      const double a = f.has_envelope() ? std::abs(f.envelope[k]) : std::abs(f.values[k]);
      tail_max[k] = std::max(tail_max[k + 1], a);
    }
  }
  const std::size_t max_steps =
      static_cast<std::size_t>(std::floor((t_final - rho0.time) / h + 1e-9));
  n_steps = std::min(n_steps, max_steps);
  double last_sample = st.time;
  std::vector<std::pair<int, int>> excited_local;  // (sector, local index)
  for (std::size_t k = 0; k < secs.size(); ++k) {
    for (int a = 0; a < secs[k].n; ++a) {
      if (sys_.labels[secs[k].idx[a]] == StateLabel::Excited) excited_local.emplace_back(static_cast<int>(k), a);
    }
  }

  std::size_t j = 0;
  for (; j < n_steps; ++j) {
    const std::size_t first = pwc ? j : 2 * j;
    if (tail_max[first] <= opt_.field_threshold) break;
    std::complex<double> e[3];
    if (pwc) {
      e[0] = e[1] = e[2] = stage_value(f, j);
    } else {
      e[0] = stage_value(f, 2 * j);
      e[1] = stage_value(f, 2 * j + 1);
      e[2] = stage_value(f, 2 * j + 2);
    }
    double tr_before = 0.0;
    for (std::size_t k = 0; k < secs.size(); ++k) tr_before += st.re[k].trace();
    advance(st, e, false, *ws);
    double tr_after = 0.0, pe = 0.0;
    double pmin = 0.0;
    for (std::size_t k = 0; k < secs.size(); ++k) {
      tr_after += st.re[k].trace();
      pmin = std::min(pmin, st.re[k].diagonal().minCoeff());
    }
    for (auto [k, a] : excited_local) pe += st.re[k](a, a);
    tr.max_pe = std::max(tr.max_pe, pe);
    tr.min_population = std::min(tr.min_population, pmin);
    const double drift = std::abs(tr_after - tr_before);
    tr.max_trace_error = std::max(tr.max_trace_error, std::abs(tr_after - 1.0));
    if (!std::isfinite(tr_after) || drift > opt_.trace_tolerance) {
      std::ostringstream os;
      os << "trace drift " << drift << " in one step at t = " << st.time << " fs (dt = " << h
         << " fs); integrator unstable, reduce dt";
      throw PropagationError(os.str());
    }
    if (st.time - last_sample >= opt_.stride_field - 1e-9) {
      record(pwc ? f.values[j] : f.values[std::min(first + 2, f.values.size() - 1)]);
      last_sample = st.time;
    }
  }
  tr.field_steps = static_cast<long>(j);

  // Field-free path: exact population relaxation, analytic coherence decay.
  tr.fast_path_time = st.time;
  if (st.time < t_final - 1e-9) {
    std::vector<Eigen::MatrixXd> dr, di;
    auto decay = [&](double d, std::vector<Eigen::MatrixXd>& re, std::vector<Eigen::MatrixXd>& im) {
      re.clear();
      im.clear();
      for (const auto& s : secs) {
        Eigen::MatrixXd a(s.n, s.n), b(s.n, s.n);
        for (int q = 0; q < s.n; ++q) {
          for (int p = 0; p < s.n; ++p) {
            const double mag = p == q ? 1.0 : std::exp(-s.gamma(p, q) * d);
            a(p, q) = mag * std::cos(s.omega(p, q) * d);
            b(p, q) = -mag * std::sin(s.omega(p, q) * d);
          }
        }
        re.push_back(std::move(a));
        im.push_back(std::move(b));
      }
    };
    decay(opt_.stride_free, dr, di);
    const auto& K = simd::kernels();
    Eigen::VectorXd p = populations();
    while (st.time < t_final - 1e-9) {
      const double d = std::min(opt_.stride_free, t_final - st.time);
      const bool full_stride = std::abs(d - opt_.stride_free) < 1e-12;
      std::vector<Eigen::MatrixXd> rr, ri;
      if (!full_stride) decay(d, rr, ri);
      p = relax_populations(p, d);
      for (std::size_t k = 0; k < secs.size(); ++k) {
        const std::size_t n2 = static_cast<std::size_t>(secs[k].n) * secs[k].n;
        const auto& fr = full_stride ? dr[k] : rr[k];
        const auto& fi = full_stride ? di[k] : ri[k];
        K.cmul_axpy(n2, 1.0, fr.data(), fi.data(), st.re[k].data(), st.im[k].data(), nullptr, nullptr,
                    st.re[k].data(), st.im[k].data());
        for (int a = 0; a < secs[k].n; ++a) st.re[k](a, a) = p(secs[k].idx[a]);
      }
      st.time += d;
      tr.max_trace_error = std::max(tr.max_trace_error, std::abs(p.sum() - 1.0));
      record(0.0);
    }
  } else if (tr.times.back() < st.time - 1e-9) {
    record(0.0);
  }

  const Eigen::VectorXd pf = populations();
  tr.final_trans = sum_over(pf, StateLabel::Trans);
  tr.final_cis = sum_over(pf, StateLabel::Cis);
  tr.final_e = sum_over(pf, StateLabel::Excited);
  tr.final_state = to_density(st);
  return tr;
}

TrajectoryRecord run_constrained(const Propagator& prop, const FieldSpec& spec, double mu_ge, double temperature,
                                 double t_final, double area_dt) {
  if (prop.options().coupling != Coupling::Rwa) {
    throw PropagationError("constrained runs use rotating-wave coupling");
  }
  const SampledField f = synthesize_envelope(spec, prop.field_grid(t_final));
  TrajectoryRecord tr = prop.propagate(thermal_state(prop.system().energies, temperature), f, t_final);
  tr.pulse_area = pulse_area(spec, mu_ge, 0.0, t_final, area_dt);
  return tr;
}

}  // namespace isomctl
