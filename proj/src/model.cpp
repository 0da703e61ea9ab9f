#include "isomctl/model.hpp"

#include "isomctl/io.hpp"
#include "isomctl/units.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace isomctl {

namespace {

constexpr double kResolutionMargin = 1.25;
constexpr double kDegeneracyTol = 1e-9;

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Index of phi -> -phi on the periodic grid.
int mirror(int n, int n_grid) { return (n_grid - n) % n_grid; }

bool parity_symmetric(const Eigen::MatrixXd& m, int n_grid) {
  const int dim = static_cast<int>(m.rows());
  auto p = [&](int i) { return i < n_grid ? mirror(i, n_grid) : n_grid + mirror(i - n_grid, n_grid); };
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  for (int j = 0; j < dim; ++j) {
    for (int i = 0; i < dim; ++i) {
      if (std::abs(m(i, j) - m(p(i), p(j))) > 1e-12 * scale) return false;
    }
  }
  return true;
}

// Columns span the even (or odd) subspace of the 2-surface grid space.
Eigen::MatrixXd symmetry_basis(int n_grid, Parity parity) {
  const int half = n_grid / 2;
  const int per_surface = parity == Parity::Even ? half + 1 : half - 1;
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(2 * n_grid, 2 * per_surface);
  const double r = 1.0 / std::sqrt(2.0);
  for (int surf = 0; surf < 2; ++surf) {
    const int off = surf * n_grid;
    int col = surf * per_surface;
    if (parity == Parity::Even) {
      s(off + 0, col++) = 1.0;
      for (int n = 1; n < half; ++n) {
        s(off + n, col) = r;
        s(off + n_grid - n, col) = r;
        ++col;
      }
      s(off + half, col++) = 1.0;
    } else {
      for (int n = 1; n < half; ++n) {
        s(off + n, col) = r;
        s(off + n_grid - n, col) = -r;
        ++col;
      }
    }
  }
  return s;
}

struct RawPair {
  double energy;
  Eigen::VectorXd vec;
  Parity parity;
  double cos_phi;
};

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index imax = 0;
  v.cwiseAbs().maxCoeff(&imax);
  if (v(imax) < 0) v = -v;
}

double cos_expectation(const Eigen::VectorXd& v, const Eigen::VectorXd& cosphi, int n_grid) {
  double acc = 0.0;
  for (int n = 0; n < n_grid; ++n) {
    acc += cosphi(n) * (v(n) * v(n) + v(n_grid + n) * v(n_grid + n));
  }
  return acc;
}

}  // namespace

void ModelSpec::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ModelError("model." + field + ": " + why);
  };
  if (!(inertia > 0)) fail("inertia", "must be > 0");
  if (!(a0 > 0)) fail("a0", "must be > 0");
  if (!(a2 > 0)) fail("a2", "must be > 0");
  if (!(v_eg > 0)) fail("v_eg", "must be > 0");
  if (!(temperature > 0)) fail("temperature", "must be > 0");
  if (!std::isfinite(a1)) fail("a1", "must be finite");
  if (!std::isfinite(mu_ge)) fail("mu_ge", "must be finite");
  if (n_grid < 64 || !is_power_of_two(n_grid)) fail("n_grid", "must be a power of two >= 64");
  if (!e_max && n_basis < trans_count + cis_count)
    fail("n_basis", "must be at least " + std::to_string(trans_count + cis_count));
  if (e_max && !(*e_max > 0)) fail("e_max", "must be > 0");
  if (trans_count <= 0 || cis_count <= 0) fail("trans_count/cis_count", "must be positive");
}

std::uint64_t hash(const ModelSpec& s) {
  std::ostringstream os;
  os.precision(17);
  os << "model:v1|" << s.inertia << '|' << s.a0 << '|' << s.a1 << '|' << s.a2 << '|' << s.v_eg << '|'
     << s.mu_ge << '|' << s.n_grid << '|' << s.n_basis << '|' << (s.e_max ? *s.e_max : -1.0) << '|'
     << s.temperature << '|' << s.trans_count << '|' << s.cis_count;
  return fnv1a64(os.str());
}

const char* to_string(StateLabel label) {
  switch (label) {
    case StateLabel::Trans: return "TRANS";
    case StateLabel::Cis: return "CIS";
    case StateLabel::Excited: return "EXCITED";
  }
  return "?";
}

const char* to_string(Parity parity) {
  switch (parity) {
    case Parity::Even: return "even";
    case Parity::Odd: return "odd";
    case Parity::None: return "none";
  }
  return "?";
}

Eigen::MatrixXd fourier_kinetic_matrix(int n, double b) {
  if (n < 2 || n % 2 != 0) throw ModelError("kinetic matrix needs an even grid size");
  Eigen::MatrixXd t(n, n);
  const double diag = b * (static_cast<double>(n) * n + 2.0) / 12.0;
  for (int j = 0; j < n; ++j) {
    t(j, j) = diag;
    for (int l = j + 1; l < n; ++l) {
      const int d = l - j;
      const double s = std::sin(units::kPi * d / n);
      const double v = b * ((d % 2 == 0) ? 1.0 : -1.0) / (2.0 * s * s);
      t(j, l) = v;
      t(l, j) = v;
    }
  }
  return t;
}

int required_grid_size(double e_top, double b) {
  int n = 64;
  while (b * (n / 2.0) * (n / 2.0) < kResolutionMargin * e_top) n *= 2;
  return n;
}

GridOperator build_hamiltonian(const ModelSpec& spec) {
  spec.validate();
  GridOperator h;
  const int n = spec.n_grid;
  h.n_grid = n;
  h.rotational_constant = units::rotational_constant(spec.inertia);
  if (spec.e_max) {
    const int need = required_grid_size(*spec.e_max, h.rotational_constant);
    if (need > n) {
      throw ModelError("model.n_grid: grid of " + std::to_string(n) +
                       " points cannot resolve states up to e_max; need n_grid >= " +
                       std::to_string(need));
    }
  }
  h.phi.resize(n);
  h.v_g.resize(n);
  h.v_e.resize(n);
  for (int i = 0; i < n; ++i) {
    const double phi = 2.0 * units::kPi * i / n;
    h.phi(i) = phi;
    h.v_g(i) = spec.a0 * (1.0 - std::cos(phi));
    h.v_e(i) = spec.a1 + spec.a2 * std::cos(phi);
  }
  h.v_eg = spec.v_eg;
  const Eigen::MatrixXd t = fourier_kinetic_matrix(n, h.rotational_constant);
  h.matrix = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  h.matrix.topLeftCorner(n, n) = t;
  h.matrix.bottomRightCorner(n, n) = t;
  h.matrix.topLeftCorner(n, n).diagonal() += h.v_g;
  h.matrix.bottomRightCorner(n, n).diagonal() += h.v_e;
  h.matrix.topRightCorner(n, n).diagonal().setConstant(spec.v_eg);
  h.matrix.bottomLeftCorner(n, n).diagonal().setConstant(spec.v_eg);
  return h;
}

EigenSystem diagonalize(const GridOperator& h, const ModelSpec& spec) {
  const int n = h.n_grid;
  const Eigen::MatrixXd& m = h.matrix;
  if (m.rows() != 2 * n || m.cols() != 2 * n) throw ModelError("grid operator has wrong shape");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw ModelError("grid operator is not Hermitian");
  }

  Eigen::VectorXd cosphi = h.phi.array().cos();
  std::vector<RawPair> raw;
  raw.reserve(2 * n);

  auto collect = [&](const Eigen::MatrixXd& basis, Parity parity) {
    const Eigen::MatrixXd hb = basis.transpose() * m * basis;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(hb);
    if (solver.info() != Eigen::Success) throw ModelError("eigensolver failed");
    const Eigen::MatrixXd vecs = basis * solver.eigenvectors();
    for (int k = 0; k < vecs.cols(); ++k) {
      RawPair p{solver.eigenvalues()(k), vecs.col(k), parity, 0.0};
      fix_sign(p.vec);
      p.cos_phi = cos_expectation(p.vec, cosphi, n);
      raw.push_back(std::move(p));
    }
  };

  if (parity_symmetric(m, n)) {
    collect(symmetry_basis(n, Parity::Even), Parity::Even);
    collect(symmetry_basis(n, Parity::Odd), Parity::Odd);
  } else {
    collect(Eigen::MatrixXd::Identity(2 * n, 2 * n), Parity::None);
  }

  std::stable_sort(raw.begin(), raw.end(), [](const RawPair& a, const RawPair& b) {
    return a.energy < b.energy;
  });
  // Degenerate groups: larger <cos phi> first.
  for (std::size_t i = 0; i < raw.size();) {
    std::size_t j = i + 1;
    while (j < raw.size() &&
           raw[j].energy - raw[j - 1].energy <= kDegeneracyTol * std::max(1.0, std::abs(raw[j].energy))) {
      ++j;
    }
    std::stable_sort(raw.begin() + i, raw.begin() + j,
                     [](const RawPair& a, const RawPair& b) { return a.cos_phi > b.cos_phi; });
    i = j;
  }

  int keep = 0;
  if (spec.e_max) {
    while (keep < static_cast<int>(raw.size()) && raw[keep].energy <= *spec.e_max) ++keep;
  } else {
    keep = std::min<int>(spec.n_basis, static_cast<int>(raw.size()));
  }
  const int needed = spec.trans_count + spec.cis_count;
  if (keep < needed) {
    throw ModelError("truncation retains " + std::to_string(keep) + " states; at least " +
                     std::to_string(needed) + " are required");
  }
  const double e_top = raw[keep - 1].energy;
  const int need_grid = required_grid_size(e_top, h.rotational_constant);
  if (need_grid > n) {
    throw ModelError("model.n_grid: grid of " + std::to_string(n) + " points cannot resolve states up to " +
                     std::to_string(e_top) + " cm^-1; need n_grid >= " + std::to_string(need_grid));
  }

  EigenSystem es;
  es.spec = spec;
  es.n_grid = n;
  es.energies.resize(keep);
  es.vectors.resize(2 * n, keep);
  es.cos_phi.resize(keep);
  es.parity.resize(keep);
  for (int k = 0; k < keep; ++k) {
    es.energies(k) = raw[k].energy;
    es.vectors.col(k) = raw[k].vec;
    es.cos_phi(k) = raw[k].cos_phi;
    es.parity[k] = raw[k].parity;
  }

  const auto g = es.vectors.topRows(n);
  const auto e = es.vectors.bottomRows(n);
  const Eigen::MatrixXd ge = g.transpose() * e;
  es.dipole = spec.mu_ge * (ge + ge.transpose());
  es.coupling = g.transpose() * cosphi.asDiagonal() * g + e.transpose() * cosphi.asDiagonal() * e;
  for (int j = 0; j < keep; ++j) {
    for (int i = 0; i < keep; ++i) {
      const bool cross = es.parity[i] != Parity::None && es.parity[i] != es.parity[j];
      if (cross) {
        es.dipole(i, j) = 0.0;
        es.coupling(i, j) = 0.0;
      }
    }
  }
  es.dipole = 0.5 * (es.dipole + es.dipole.transpose()).eval();
  es.coupling = 0.5 * (es.coupling + es.coupling.transpose()).eval();

  // Lower adiabatic electronic vector at each grid point.
  Eigen::VectorXd cg(n), ce(n);
  for (int i = 0; i < n; ++i) {
    const double a = h.v_g(i), d = h.v_e(i), v = h.v_eg;
    const double lower = 0.5 * (a + d) - std::sqrt(0.25 * (a - d) * (a - d) + v * v);
    double x = v, y = lower - a;  // (H - lower) [x y]^T = 0 from the first row
    if (std::abs(v) < 1e-300) {
      x = a <= d ? 1.0 : 0.0;
      y = a <= d ? 0.0 : 1.0;
    }
    const double nrm = std::hypot(x, y);
    cg(i) = x / nrm;
    ce(i) = y / nrm;
  }
  es.ground_weight.resize(keep);
  for (int k = 0; k < keep; ++k) {
    const Eigen::VectorXd amp = cg.cwiseProduct(g.col(k)) + ce.cwiseProduct(e.col(k));
    es.ground_weight(k) = amp.squaredNorm();
  }
  return es;
}

EigenSystem classify_states(EigenSystem es) {
  const int n = es.size();
  const int want_t = es.spec.trans_count;
  const int want_c = es.spec.cis_count;
  es.labels.assign(n, StateLabel::Excited);
  es.trans.clear();
  es.cis.clear();
  es.excited.clear();
  for (int k = 0; k < n; ++k) {
    if (es.ground_weight(k) <= 0.5) continue;
    if (es.cos_phi(k) > 0 && static_cast<int>(es.trans.size()) < want_t) {
      es.labels[k] = StateLabel::Trans;
      es.trans.push_back(k);
    } else if (es.cos_phi(k) < 0 && static_cast<int>(es.cis.size()) < want_c) {
      es.labels[k] = StateLabel::Cis;
      es.cis.push_back(k);
    }
  }
  if (static_cast<int>(es.trans.size()) < want_t || static_cast<int>(es.cis.size()) < want_c) {
    std::ostringstream os;
    os << "state classification found " << es.trans.size() << " trans (need " << want_t << ") and "
       << es.cis.size() << " cis (need " << want_c << ") states; candidates:";
    for (int k = 0; k < n; ++k) {
      if (es.ground_weight(k) > 0.5) {
        os << " [" << k << " E=" << es.energies(k) << " w=" << es.ground_weight(k)
           << " cos=" << es.cos_phi(k) << "]";
      }
    }
    throw ModelError(os.str());
  }
  for (int k = 0; k < n; ++k) {
    if (es.labels[k] == StateLabel::Excited) es.excited.push_back(k);
  }
  return es;
}

EigenSystem build_eigensystem(const ModelSpec& spec) {
  return classify_states(diagonalize(build_hamiltonian(spec), spec));
}

namespace {

constexpr char kEigenMagic[8] = {'I', 'S', 'O', 'E', 'I', 'G', '0', '1'};

}  // namespace

void save_eigensystem(const std::filesystem::path& path, const EigenSystem& es) {
  BinaryWriter w(path, kEigenMagic);
  w.u64(hash(es.spec));
  w.i64(es.n_grid);
  w.matrix(es.energies);
  w.matrix(es.vectors);
  w.matrix(es.dipole);
  w.matrix(es.coupling);
  w.matrix(es.ground_weight);
  w.matrix(es.cos_phi);
  std::vector<std::int64_t> par(es.parity.size());
  for (std::size_t i = 0; i < par.size(); ++i) par[i] = static_cast<std::int64_t>(es.parity[i]);
  w.ints(par);
  w.finish();
}

std::optional<EigenSystem> load_eigensystem(const std::filesystem::path& path, const ModelSpec& spec) {
  auto r = BinaryReader::open(path, kEigenMagic);
  if (!r) return std::nullopt;
  if (r->u64() != hash(spec)) return std::nullopt;
  EigenSystem es;
  es.spec = spec;
  es.n_grid = static_cast<int>(r->i64());
  es.energies = r->vector();
  es.vectors = r->matrix();
  es.dipole = r->matrix();
  es.coupling = r->matrix();
  es.ground_weight = r->vector();
  es.cos_phi = r->vector();
  const auto par = r->ints();
  if (!r->ok() || static_cast<Eigen::Index>(par.size()) != es.energies.size()) return std::nullopt;
  es.parity.resize(par.size());
  for (std::size_t i = 0; i < par.size(); ++i) es.parity[i] = static_cast<Parity>(par[i]);
  return classify_states(std::move(es));
}

}  // namespace isomctl
