#include <doctest.h>

#include "isomctl/field.hpp"
#include "isomctl/units.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace isomctl;

namespace {

FieldSpec random_phases(std::uint64_t seed) {
  FieldSpec s;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 2.0 * units::kPi);
  std::vector<double> th(128);
  for (auto& x : th) x = u(rng);
  s.set_phases(th);
  return s;
}

double peak(const SampledField& f) { return f.max_abs(); }

SampledField carrier_field(const std::vector<double>& freqs, double t_end, double dt) {
  SampledField f = SampledField::zero(TimeGrid::covering(0.0, t_end, dt));
  for (std::size_t k = 0; k < f.values.size(); ++k) {
    for (double w : freqs) f.values[k] += std::cos(w * units::kWavenumberToAngular * f.grid.time(k));
  }
  return f;
}

}  // namespace

TEST_SUITE("field") {

TEST_CASE("default component frequencies") {
  const FieldSpec s;
  REQUIRE(s.frequencies.size() == 128);
  for (int i = 0; i < 128; ++i) CHECK(s.frequencies[i] == 24800.0 + 3.125 * i);
  CHECK(s.phases.size() == 128);
}

TEST_CASE("phases are wrapped into [0, 2pi)") {
  FieldSpec s;
  s.set_phases(std::vector<double>(128, -0.5));
  for (double p : s.phases) CHECK(p == doctest::Approx(2.0 * units::kPi - 0.5));
  CHECK(wrap_phase(2.0 * units::kPi) == 0.0);
  CHECK(wrap_phase(7.0) == doctest::Approx(7.0 - 2.0 * units::kPi));
}

TEST_CASE("aligned phases add constructively at t0") {
  const FieldSpec s;
  CHECK(evaluate(s, s.t0) == doctest::Approx(590.4346178649869).epsilon(1e-12));
  const auto f = synthesize(s, TimeGrid::covering(1500.0, 2500.0, 0.05));
  CHECK(peak(f) == doctest::Approx(590.4346178649869).epsilon(0.01));
}

TEST_CASE("zero amplitude gives an identically zero field") {
  FieldSpec s = random_phases(3);
  s.amplitude = 0.0;
  const auto f = synthesize(s, TimeGrid::covering(0.0, 4000.0, 0.05));
  CHECK(peak(f) == 0.0);
  CHECK(pulse_area(f, 10.0) == 0.0);
}

TEST_CASE("random phases lower the peak") {
  const auto grid = TimeGrid::covering(0.0, 6000.0, 0.05);
  const double aligned = peak(synthesize(FieldSpec{}, grid));
  for (std::uint64_t seed : {1u, 2u, 3u}) CHECK(peak(synthesize(random_phases(seed), grid)) < aligned);
}

TEST_CASE("synthesis agrees with direct evaluation") {
  const FieldSpec s = random_phases(11);
  const auto grid = TimeGrid::covering(100.0, 400.0, 0.05);
  const auto f = synthesize(s, grid);
  for (std::size_t k = 0; k < grid.n; k += 97) {
    CHECK(f.values[k] == doctest::Approx(evaluate(s, grid.time(k))).epsilon(1e-9).scale(590.0));
  }
}

TEST_CASE("linearity in the amplitude") {
  FieldSpec a = random_phases(5);
  FieldSpec b = a;
  b.amplitude = 3.0 * a.amplitude;
  const auto grid = TimeGrid::covering(1000.0, 1500.0, 0.05);
  const auto fa = synthesize(a, grid);
  const auto fb = synthesize(b, grid);
  for (std::size_t k = 0; k < grid.n; ++k) CHECK(fb.values[k] == doctest::Approx(3.0 * fa.values[k]).scale(1e-9));
  CHECK(pulse_area(b, 10.0, 0.0, 6000.0, 0.05) == doctest::Approx(3.0 * pulse_area(a, 10.0, 0.0, 6000.0, 0.05)));
}

TEST_CASE("undersampled grid is rejected with the required step") {
  const FieldSpec s;
  CHECK(max_sampling_dt(s) == doctest::Approx(1.0 / (25196.875 * units::kSpeedOfLightCmPerFs * 20.0)));
  CHECK_THROWS_WITH_AS(synthesize(s, TimeGrid::covering(0.0, 100.0, 0.2)), doctest::Contains("need dt"), FieldError);
}

TEST_CASE("pulse area of a rectangle") {
  SampledField f = SampledField::zero(TimeGrid{0.0, 0.5, 200});
  f.piecewise_constant = true;
  for (std::size_t k = 40; k < 120; ++k) f.values[k] = (k % 2 ? -3.0 : 3.0);
  const double expect = 10.0 * units::kDebyeMVPerMToWavenumber * 3.0 * 40.0 / units::kHbar;
  CHECK(pulse_area(f, 10.0) == doctest::Approx(expect).epsilon(1e-14));
  CHECK(pulse_area(SampledField::zero(TimeGrid{0.0, 1.0, 10}), 10.0) == 0.0);
}

TEST_CASE("unmodulated pulse area over 20 ps") {
  // independent quadrature at dt = 0.01 fs
  CHECK(pulse_area(FieldSpec{}, 10.0, 0.0, 20000.0, 0.02) == doctest::Approx(23.587012497752447).epsilon(1e-5));
}

TEST_CASE("constant phase offset leaves the envelope unchanged") {
  FieldSpec a;
  FieldSpec b;
  b.set_phases(std::vector<double>(128, 1.3));
  const auto grid = TimeGrid::covering(0.0, 6000.0, 0.05);
  const auto ea = amplitude_envelope(synthesize(a, grid));
  const auto eb = amplitude_envelope(synthesize(b, grid));
  const double top = *std::max_element(ea.begin(), ea.end());
  double worst = 0.0;
  for (std::size_t k = grid.n / 10; k < grid.n - grid.n / 10; ++k) worst = std::max(worst, std::abs(ea[k] - eb[k]));
  CHECK(worst <= 0.01 * top);
}

TEST_CASE("fluence windows") {
  SampledField f = SampledField::zero(TimeGrid{0.0, 1.0, 100});
  f.piecewise_constant = true;
  for (auto& v : f.values) v = 2.0;
  CHECK(fluence(f) == doctest::Approx(400.0));
  CHECK(fluence(f, 10.0, 30.0) == doctest::Approx(80.0));
}

TEST_CASE("spectrogram of a single carrier is a flat ridge") {
  const auto f = carrier_field({25000.0}, 2000.0, 0.05);
  const auto s = spectrogram(f, {});
  REQUIRE(s.frequencies.size() > 2);
  const Eigen::Index mid_t = static_cast<Eigen::Index>(s.times.size() / 2);
  Eigen::Index arg = 0;
  s.intensity.col(mid_t).maxCoeff(&arg);
  const double df = s.frequencies[1] - s.frequencies[0];
  CHECK(std::abs(s.frequencies[arg] - 25000.0) <= df);
  for (std::size_t t = 8; t + 8 < s.times.size(); ++t) {
    CHECK(s.intensity(arg, static_cast<Eigen::Index>(t)) == doctest::Approx(s.intensity(arg, mid_t)).epsilon(0.02));
  }
}

TEST_CASE("two carriers give two ridges") {
  const auto f = carrier_field({24400.0, 25600.0}, 2000.0, 0.05);
  const auto s = spectrogram(f, {150.0, 20.0, 24000.0, 26000.0});
  const Eigen::VectorXd col = s.intensity.col(static_cast<Eigen::Index>(s.times.size() / 2));
  auto value_at = [&](double w) {
    std::size_t k = 0;
    while (k + 1 < s.frequencies.size() && s.frequencies[k] < w) ++k;
    return col(static_cast<Eigen::Index>(k));
  };
  CHECK(value_at(24400.0) > 0.5);
  CHECK(value_at(25600.0) > 0.5);
  CHECK(value_at(25000.0) < 1e-3);
}

TEST_CASE("constrained pulse spectrogram") {
  const FieldSpec s = random_phases(9);
  const auto f = synthesize(s, TimeGrid::covering(0.0, 6000.0, 0.05));
  const auto sp = spectrogram(f, {150.0, 50.0, 23000.0, 27000.0});
  double inside = 0.0, total = 0.0;
  for (std::size_t k = 0; k < sp.frequencies.size(); ++k) {
    const double row = sp.intensity.row(static_cast<Eigen::Index>(k)).sum();
    total += row;
    if (std::abs(sp.frequencies[k] - s.omega0) <= 4.0 * s.delta_omega) inside += row;
  }
  CHECK(inside >= 0.999 * total);

  const auto g = synthesize(FieldSpec{}, TimeGrid::covering(0.0, 6000.0, 0.05));
  const auto sg = spectrogram(g, {150.0, 20.0, 24000.0, 26000.0});
  Eigen::Index r = 0, c = 0;
  sg.intensity.maxCoeff(&r, &c);
  CHECK(sg.times[c] == doctest::Approx(2000.0).epsilon(0.02));
  CHECK(sg.frequencies[r] == doctest::Approx(25000.0).epsilon(0.002));
}

TEST_CASE("band projection removes out-of-band content") {
  auto f = carrier_field({20000.0, 25000.0}, 1500.0, 0.05);
  project_band(f, 24000.0, 26000.0);
  const auto ref = carrier_field({25000.0}, 1500.0, 0.05);
  double worst = 0.0;
  for (std::size_t k = f.values.size() / 4; k < 3 * f.values.size() / 4; ++k) {
    worst = std::max(worst, std::abs(f.values[k] - ref.values[k]));
  }
  CHECK(worst < 0.02);
}

TEST_CASE("pulse shape analysis") {
  SampledField f = SampledField::zero(TimeGrid::covering(0.0, 4000.0, 0.5));
  for (std::size_t k = 0; k < f.values.size(); ++k) {
    const double t = f.grid.time(k);
    f.values[k] = std::exp(-std::pow((t - 1900.0) / 100.0, 2)) * std::cos(0.5 * t);
  }
  const auto shape = analyze_shape(f, 200.0);
  CHECK(shape.peak_time == doctest::Approx(1900.0).epsilon(0.005));
  CHECK(shape.fwhm == doctest::Approx(200.0 * std::sqrt(std::log(2.0))).epsilon(0.02));
  CHECK(shape.max_window_fraction == doctest::Approx(std::erf(std::sqrt(2.0))).epsilon(0.005));
}

}
