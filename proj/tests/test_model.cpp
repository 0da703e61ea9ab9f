#include <doctest.h>

#include "isomctl/model.hpp"
#include "isomctl/units.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <filesystem>

using namespace isomctl;

namespace {

const EigenSystem& reference_system() {
  static const EigenSystem es = [] {
    ModelSpec s;
    s.n_basis = 200;
    return build_eigensystem(s);
  }();
  return es;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("kinetic matrix matches the explicit Fourier sum") {
  const int n = 32;
  const double b = 3.0;
  const auto t = fourier_kinetic_matrix(n, b);
  for (int j = 0; j < n; ++j) {
    for (int l = 0; l < n; ++l) {
      double s = 0.0;
      for (int m = -n / 2 + 1; m <= n / 2; ++m) s += m * m * std::cos(2.0 * units::kPi * m * (j - l) / n);
      CHECK(t(j, l) == doctest::Approx(b * s / n).epsilon(1e-11).scale(b * n));
    }
  }
}

TEST_CASE("kinetic spectrum is the free rotor B k^2") {
  const int n = 64;
  const double b = units::rotational_constant(5.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fourier_kinetic_matrix(n, b));
  std::vector<double> expect;
  for (int k = -n / 2 + 1; k <= n / 2; ++k) expect.push_back(b * k * k);
  std::sort(expect.begin(), expect.end());
  for (int i = 0; i < n; ++i) CHECK(es.eigenvalues()(i) == doctest::Approx(expect[i]).epsilon(1e-10).scale(b));
}

TEST_CASE("potential surfaces and coupling block") {
  const ModelSpec spec;
  const auto h = build_hamiltonian(spec);
  const int n = h.n_grid;
  CHECK(h.v_g(0) == doctest::Approx(0.0));
  CHECK(h.v_g(n / 2) == doctest::Approx(31800.0));
  CHECK(h.v_e(0) == doctest::Approx(25000.0));
  CHECK(h.v_e(n / 2) == doctest::Approx(10000.0));
  for (int k = 0; k < n; ++k) {
    CHECK(h.matrix(k, n + k) == 1000.0);
    CHECK(h.matrix(n + k, k) == 1000.0);
  }
  CHECK((h.matrix - h.matrix.transpose()).cwiseAbs().maxCoeff() == 0.0);
  // vertical gap at the trans geometry sits on the pulse center
  CHECK(h.v_e(0) - h.v_g(0) == doctest::Approx(25000.0));
}

TEST_CASE("uncoupled flat excited surface gives free-rotor levels above a1") {
  ModelSpec spec;
  spec.a2 = 1e-9;
  spec.v_eg = 1e-9;
  spec.n_grid = 256;
  spec.n_basis = 240;
  const auto h = build_hamiltonian(spec);
  const auto es = diagonalize(h, spec);
  const double b = units::rotational_constant(spec.inertia);
  for (int k = 0; k <= 6; ++k) {
    const double target = spec.a1 + b * k * k;
    double best = 1e300;
    for (int i = 0; i < es.size(); ++i) best = std::min(best, std::abs(es.energies(i) - target));
    CHECK(best < 1e-6);
  }
}

TEST_CASE("eigensystem invariants") {
  const auto& es = reference_system();
  REQUIRE(es.size() == 200);
  const Eigen::MatrixXd gram = es.vectors.transpose() * es.vectors;
  CHECK((gram - Eigen::MatrixXd::Identity(200, 200)).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((es.dipole - es.dipole.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((es.coupling - es.coupling.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
  for (int i = 1; i < es.size(); ++i) CHECK(es.energies(i) >= es.energies(i - 1));

  const auto h = build_hamiltonian(es.spec);
  const double lmax = es.energies.cwiseAbs().maxCoeff();
  const Eigen::MatrixXd resid = h.matrix * es.vectors - es.vectors * es.energies.asDiagonal();
  for (int i = 0; i < es.size(); ++i) CHECK(resid.col(i).norm() <= 1e-8 * lmax);
}

TEST_CASE("dipole and coupling operators in the diabatic basis") {
  const auto& es = reference_system();
  const int n = es.n_grid;
  const auto g = es.vectors.topRows(n);
  const auto e = es.vectors.bottomRows(n);
  const Eigen::MatrixXd mu = es.spec.mu_ge * (g.transpose() * e + e.transpose() * g);
  CHECK((mu - es.dipole).cwiseAbs().maxCoeff() <= 1e-10);
  Eigen::VectorXd c(n);
  for (int k = 0; k < n; ++k) c(k) = std::cos(2.0 * units::kPi * k / n);
  const Eigen::MatrixXd q = g.transpose() * c.asDiagonal() * g + e.transpose() * c.asDiagonal() * e;
  CHECK((q - es.coupling).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(es.coupling(0, 0) > 0.95);
}

TEST_CASE("ground state agrees with a 512-point independent diagonalization") {
  const auto& es = reference_system();
  CHECK(es.energies(0) == doctest::Approx(123.37622082277197).epsilon(1e-9));
  CHECK(es.energies(199) == doctest::Approx(27157.23961683962).epsilon(1e-9));
  CHECK(es.energies(0) > 0.0);
  CHECK(es.energies(0) < 163.7233);  // half harmonic quantum of the ground well
}

TEST_CASE("grid convergence: doubling n_grid moves no retained level by 0.1 cm^-1") {
  ModelSpec fine = reference_system().spec;
  fine.n_grid = 512;
  const auto h = build_hamiltonian(fine);
  const auto es2 = diagonalize(h, fine);
  const auto& es = reference_system();
  CHECK((es2.energies - es.energies).cwiseAbs().maxCoeff() <= 0.1);
}

TEST_CASE("classification") {
  const auto& es = reference_system();
  CHECK(es.trans.size() == 49);
  CHECK(es.cis.size() == 23);
  CHECK(es.trans.size() + es.cis.size() + es.excited.size() == static_cast<std::size_t>(es.size()));
  CHECK(es.labels[0] == StateLabel::Trans);
  CHECK(es.cis.front() == 32);
  CHECK(es.trans.back() == 70);
  int first_negative = -1;
  for (int i = 0; i < es.size() && first_negative < 0; ++i) {
    if (es.cos_phi(i) < 0 && es.ground_weight(i) > 0.5) first_negative = i;
  }
  CHECK(es.labels[first_negative] == StateLabel::Cis);
  for (int i : es.trans) CHECK((es.cos_phi(i) > 0 && es.ground_weight(i) > 0.5));
  for (int i : es.cis) CHECK((es.cos_phi(i) < 0 && es.ground_weight(i) > 0.5));
}

TEST_CASE("validation and truncation errors") {
  ModelSpec s;
  s.n_grid = 100;
  CHECK_THROWS_AS(s.validate(), ModelError);
  s = ModelSpec{};
  s.inertia = -1;
  CHECK_THROWS_AS(s.validate(), ModelError);
  s = ModelSpec{};
  s.v_eg = 0;
  CHECK_THROWS_AS(s.validate(), ModelError);
  s = ModelSpec{};
  s.n_basis = 50;
  CHECK_THROWS_WITH_AS(build_eigensystem(s), doctest::Contains("72"), ModelError);
  s = ModelSpec{};
  s.e_max = 40000.0;
  s.n_grid = 64;
  CHECK_THROWS_WITH_AS(build_hamiltonian(s), doctest::Contains("n_grid"), ModelError);
  s = ModelSpec{};
  s.n_basis = 90;
  s.cis_count = 40;
  CHECK_THROWS_WITH_AS(build_eigensystem(s), doctest::Contains("cis"), ModelError);
}

TEST_CASE("binary cache round trip") {
  const auto& es = reference_system();
  const auto path = std::filesystem::temp_directory_path() / "isomctl-test-eigen.bin";
  save_eigensystem(path, es);
  const auto back = load_eigensystem(path, es.spec);
  REQUIRE(back.has_value());
  CHECK(back->energies == es.energies);
  CHECK(back->dipole == es.dipole);
  CHECK(back->labels == es.labels);
  ModelSpec other = es.spec;
  other.a0 += 1.0;
  CHECK_FALSE(load_eigensystem(path, other).has_value());
  std::filesystem::remove(path);
}

}
