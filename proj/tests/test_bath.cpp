#include <doctest.h>

#include "isomctl/bath.hpp"
#include "isomctl/units.hpp"
#include "oracle/redfield_quadrature.hpp"

#include <cmath>

using namespace isomctl;

namespace {

const EigenSystem& system200() {
  static const EigenSystem es = [] {
    ModelSpec s;
    s.n_basis = 200;
    return build_eigensystem(s);
  }();
  return es;
}

}  // namespace

TEST_SUITE("bath") {

TEST_CASE("spectral density") {
  const BathSpec b;
  CHECK(spectral_density(0.0, b) == 0.0);
  CHECK(spectral_density(450.0, b) == doctest::Approx(827.7287426357452).epsilon(1e-12));
  CHECK(spectral_density(450.0, b) / spectral_density(900.0, b) == doctest::Approx(std::exp(1.0) / 2.0));
  CHECK_THROWS_AS(spectral_density(-1.0, b), BathError);
}

TEST_CASE("one-sided rate branches") {
  const BathSpec b;
  const double to_rate = units::kWavenumberToAngular;
  for (double w : {1.0, 50.0, 450.0, 3000.0}) {
    CHECK(one_sided_rate(w, b) - one_sided_rate(-w, b) == doctest::Approx(spectral_density(w, b) * to_rate));
  }
  CHECK(one_sided_rate(0.0, b) == doctest::Approx(0.19638050869048357).epsilon(1e-12));
  CHECK(one_sided_rate(1e-6, b) == doctest::Approx(one_sided_rate(0.0, b)).epsilon(1e-6));
  CHECK(one_sided_rate(-1e-6, b) == doctest::Approx(one_sided_rate(0.0, b)).epsilon(1e-6));
  BathSpec cold = b;
  cold.temperature = 1.0;
  CHECK(one_sided_rate(-1000.0, cold) < 1e-300);
  CHECK(one_sided_rate(1000.0, cold) > 0.0);
}

TEST_CASE("two-level detailed balance ratio") {
  Eigen::VectorXd e(2);
  e << 0.0, 1000.0;
  Eigen::MatrixXd q(2, 2);
  q << 0.0, 1.0, 1.0, 0.0;
  const auto t = build_tensors(e, q, BathSpec{});
  CHECK(t.w(0, 1) / t.w(1, 0) == doctest::Approx(121.01601896964834).epsilon(1e-10));
  CHECK(t.gamma(0, 1) == doctest::Approx(0.5 * (t.w(0, 1) + t.w(1, 0))));
}

TEST_CASE("pure dephasing vanishes without channels and equal diagonals") {
  Eigen::VectorXd e(3);
  e << 0.0, 500.0, 900.0;
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(3, 3);
  q.diagonal().setConstant(0.4);
  const auto t = build_tensors(e, q, BathSpec{});
  CHECK(t.w.cwiseAbs().maxCoeff() == 0.0);
  CHECK(t.gamma.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("closed forms agree with brute-force quadrature on a four-level toy") {
  Eigen::VectorXd e;
  Eigen::MatrixXd q;
  oracle::toy_system(e, q);
  const oracle::RedfieldQuadrature quad({});
  const auto ref_w = quad.rates(e, q);
  const auto ref_g = quad.dephasing(e, q);
  const auto t = build_tensors(e, q, BathSpec{});
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      if (i == j) continue;
      CAPTURE(i);
      CAPTURE(j);
      CHECK(std::abs(t.w(j, i) - ref_w(j, i)) <= 0.01 * std::abs(ref_w(j, i)));
      CHECK(std::abs(t.gamma(i, j) - ref_g(i, j)) <= 0.01 * std::abs(ref_g(i, j)));
    }
  }
}

TEST_CASE("detailed balance over the full tensor set") {
  const auto& es = system200();
  const BathSpec bath;
  const auto t = build_tensors(es, bath);
  const double kt = units::thermal_energy(bath.temperature);
  double worst = 0.0;
  for (int i = 0; i < es.size(); ++i) {
    for (int j = 0; j < es.size(); ++j) {
      if (i == j || es.coupling(j, i) == 0.0) continue;
      CHECK(t.w(j, i) >= 0.0);
      if (t.w(i, j) == 0.0) continue;
      const double expect = std::exp((es.energies(i) - es.energies(j)) / kt);
      worst = std::max(worst, std::abs(t.w(j, i) / t.w(i, j) / expect - 1.0));
    }
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("Gibbs populations are stationary under the rate matrix") {
  const auto& es = system200();
  const BathSpec bath;
  const auto t = build_tensors(es, bath);
  const Eigen::VectorXd p = gibbs_populations(es.energies, bath.temperature);
  const Eigen::VectorXd flux = t.rate_matrix() * p;
  for (int i = 0; i < es.size(); ++i) {
    const double scale = (t.w.row(i).transpose().cwiseProduct(p)).sum() + t.out_rate(i) * p(i);
    if (scale == 0.0) continue;
    CHECK(std::abs(flux(i)) <= 1e-9 * scale);
  }
}

TEST_CASE("dephasing structure") {
  const auto& es = system200();
  const auto t = build_tensors(es, BathSpec{});
  CHECK((t.gamma - t.gamma.transpose()).cwiseAbs().maxCoeff() == 0.0);
  for (int i = 0; i < es.size(); ++i) {
    CHECK(t.w(i, i) == 0.0);
    CHECK(t.gamma(i, i) == 0.0);
    for (int j = 0; j < es.size(); ++j) {
      if (i == j) continue;
      CHECK(t.gamma(i, j) >= 0.5 * (t.out_rate(i) + t.out_rate(j)) - 1e-15);
    }
  }
}

TEST_CASE("rate scale multiplies every rate") {
  const auto& es = system200();
  BathSpec slow;
  slow.rate_scale = 0.25;
  const auto a = build_tensors(es, BathSpec{});
  const auto b = build_tensors(es, slow);
  CHECK((b.w - 0.25 * a.w).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK((b.gamma - 0.25 * a.gamma).cwiseAbs().maxCoeff() <= 1e-15);
}

}
