#include "isomctl/field.hpp"

#include "isomctl/simd.hpp"
#include "isomctl/units.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>

namespace isomctl {

namespace {

constexpr std::size_t kBlock = 1024;
constexpr double kSamplesPerPeriod = 20.0;

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

double envelope_factor(const FieldSpec& s, double t) {
  const double x = (t - s.t0) / (2.0 * s.width);
  return std::exp(-x * x);
}

// Sums amp_k exp(-i (w_k (t - origin) + theta_k)) over the grid, reseeding every block.
void phasor_series(const std::vector<double>& amp, const std::vector<double>& omega_rad,
                   const std::vector<double>& theta, double origin, const TimeGrid& grid,
                   std::vector<double>& out_re, std::vector<double>& out_im) {
  const std::size_t m = amp.size();
  std::vector<double> zr(m), zi(m), rr(m), ri(m);
  for (std::size_t k = 0; k < m; ++k) {
    rr[k] = std::cos(omega_rad[k] * grid.dt);
    ri[k] = -std::sin(omega_rad[k] * grid.dt);
  }
  out_re.resize(grid.n);
  out_im.resize(grid.n);
  const auto& kern = simd::kernels();
  for (std::size_t b = 0; b < grid.n; b += kBlock) {
    const double tb = grid.time(b) - origin;
    for (std::size_t k = 0; k < m; ++k) {
      const double ph = omega_rad[k] * tb + theta[k];
      zr[k] = std::cos(ph);
      zi[k] = -std::sin(ph);
    }
    const std::size_t len = std::min(kBlock, grid.n - b);
    kern.phasor_sum(m, amp.data(), zr.data(), zi.data(), rr.data(), ri.data(), len, out_re.data() + b,
                    out_im.data() + b);
  }
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

std::vector<double> FieldSpec::default_frequencies() {
  std::vector<double> f(128);
  for (int i = 0; i < 128; ++i) f[i] = 24800.0 + 3.125 * i;
  return f;
}

double wrap_phase(double theta) {
  const double two_pi = 2.0 * units::kPi;
  double r = std::fmod(theta, two_pi);
  if (r < 0) r += two_pi;
  if (r >= two_pi) r = 0.0;
  return r;
}

void FieldSpec::set_phases(const std::vector<double>& theta) {
  phases.resize(theta.size());
  std::transform(theta.begin(), theta.end(), phases.begin(), wrap_phase);
}

std::vector<double> FieldSpec::component_amplitudes() const {
  std::vector<double> a(frequencies.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = (frequencies[i] - omega0) / (2.0 * delta_omega);
    a[i] = amplitude * std::exp(-x * x);
  }
  return a;
}

void FieldSpec::validate() const {
  if (!std::isfinite(amplitude) || amplitude < 0) throw FieldError("field.amplitude: must be >= 0");
  if (!(width > 0)) throw FieldError("field.width: must be > 0");
  if (!(delta_omega > 0)) throw FieldError("field.delta_omega: must be > 0");
  if (!(omega0 > 0)) throw FieldError("field.omega0: must be > 0");
  if (frequencies.empty()) throw FieldError("field.frequencies: empty");
  if (phases.size() != frequencies.size()) {
    throw FieldError("field.phases: expected " + std::to_string(frequencies.size()) + " phases, got " +
                     std::to_string(phases.size()));
  }
  for (double p : phases) {
    if (!std::isfinite(p)) throw FieldError("field.phases: non-finite phase");
  }
}

TimeGrid TimeGrid::covering(double t_start, double t_end, double dt) {
  if (!(dt > 0)) throw FieldError("time grid: dt must be > 0");
  TimeGrid g;
  g.t_start = t_start;
  g.dt = dt;
  g.n = static_cast<std::size_t>(std::floor((t_end - t_start) / dt + 1e-9)) + 1;
  return g;
}

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::ConstrainedExpansion: return "CONSTRAINED-EXPANSION";
    case Provenance::OctFree: return "OCT-FREE";
    case Provenance::Zero: return "ZERO";
  }
  return "?";
}

double SampledField::max_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

SampledField SampledField::zero(const TimeGrid& grid) {
  SampledField f;
  f.grid = grid;
  f.values.assign(grid.n, 0.0);
  f.provenance = Provenance::Zero;
  return f;
}

double max_sampling_dt(const FieldSpec& spec) {
  const double wmax = *std::max_element(spec.frequencies.begin(), spec.frequencies.end());
  const double period = 2.0 * units::kPi / (std::abs(wmax) * units::kWavenumberToAngular);
  return period / kSamplesPerPeriod;
}

double evaluate(const FieldSpec& spec, double t) {
  const auto amp = spec.component_amplitudes();
  const double tau = t - spec.carrier_origin();
  double acc = 0.0;
  for (std::size_t i = 0; i < amp.size(); ++i) {
    acc += amp[i] * std::cos(spec.frequencies[i] * units::kWavenumberToAngular * tau + spec.phases[i]);
  }
  return envelope_factor(spec, t) * acc;
}

SampledField synthesize(const FieldSpec& spec, const TimeGrid& grid) {
  spec.validate();
  const double need = max_sampling_dt(spec);
  if (grid.dt > need * (1.0 + 1e-12)) {
    throw FieldError("field grid undersampled: dt = " + std::to_string(grid.dt) +
                     " fs, need dt <= " + std::to_string(need) + " fs");
  }
  std::vector<double> w(spec.frequencies.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = spec.frequencies[i] * units::kWavenumberToAngular;
  std::vector<double> re, im;
  phasor_series(spec.component_amplitudes(), w, spec.phases, spec.carrier_origin(), grid, re, im);
  SampledField f;
  f.grid = grid;
  f.provenance = Provenance::ConstrainedExpansion;
  f.values.resize(grid.n);
  for (std::size_t k = 0; k < grid.n; ++k) f.values[k] = envelope_factor(spec, grid.time(k)) * re[k];
  return f;
}

SampledField synthesize_envelope(const FieldSpec& spec, const TimeGrid& grid) {
  spec.validate();
  double det = 0.0;
  for (double v : spec.frequencies) det = std::max(det, std::abs(v - spec.omega0));
  if (det > 0) {
    const double need = 2.0 * units::kPi / (det * units::kWavenumberToAngular) / kSamplesPerPeriod;
    if (grid.dt > need) {
      throw FieldError("envelope grid undersampled: dt = " + std::to_string(grid.dt) +
                       " fs, need dt <= " + std::to_string(need) + " fs");
    }
  }
  std::vector<double> w(spec.frequencies.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = (spec.frequencies[i] - spec.omega0) * units::kWavenumberToAngular;
  }
  std::vector<double> re, im;
  const double origin = spec.carrier_origin();
  phasor_series(spec.component_amplitudes(), w, spec.phases, origin, grid, re, im);
  SampledField f;
  f.grid = grid;
  f.provenance = Provenance::ConstrainedExpansion;
  f.carrier = spec.omega0;
  f.carrier_origin = origin;
  f.envelope.resize(grid.n);
  f.values.resize(grid.n);
  const double wc = spec.omega0 * units::kWavenumberToAngular;
  for (std::size_t k = 0; k < grid.n; ++k) {
    const double t = grid.time(k);
    const double env = envelope_factor(spec, t);
    f.envelope[k] = {env * re[k], env * im[k]};
    const double ph = wc * (t - origin);
    f.values[k] = f.envelope[k].real() * std::cos(ph) + f.envelope[k].imag() * std::sin(ph);
  }
  return f;
}

double pulse_area(const SampledField& f, double mu_ge) {
  const std::size_t n = f.values.size();
  if (n == 0) return 0.0;
  const auto& kern = simd::kernels();
  double integral;
  if (f.piecewise_constant) {
    integral = kern.abs_sum(n, f.values.data()) * f.grid.dt;
  } else {
    if (n < 2) return 0.0;
    integral = (kern.abs_sum(n, f.values.data()) - 0.5 * (std::abs(f.values.front()) + std::abs(f.values.back()))) *
               f.grid.dt;
  }
  return std::abs(mu_ge) * units::kDebyeMVPerMToWavenumber * integral / units::kHbar;
}

double pulse_area(const FieldSpec& spec, double mu_ge, double t_start, double t_end, double dt) {
  spec.validate();
  const TimeGrid all = TimeGrid::covering(t_start, t_end, dt);
  const std::size_t chunk = 1 << 16;
  std::vector<double> w(spec.frequencies.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = spec.frequencies[i] * units::kWavenumberToAngular;
  const auto amp = spec.component_amplitudes();
  const auto& kern = simd::kernels();
  double integral = 0.0;
  std::vector<double> re, im;
  for (std::size_t b = 0; b < all.n; b += chunk) {
    TimeGrid g{all.time(b), dt, std::min(chunk, all.n - b)};
    phasor_series(amp, w, spec.phases, spec.carrier_origin(), g, re, im);
    for (std::size_t k = 0; k < g.n; ++k) re[k] *= envelope_factor(spec, g.time(k));
    integral += kern.abs_sum(g.n, re.data());
    if (b == 0) integral -= 0.5 * std::abs(re[0]);
    if (b + g.n == all.n) integral -= 0.5 * std::abs(re[g.n - 1]);
  }
  return std::abs(mu_ge) * units::kDebyeMVPerMToWavenumber * integral * dt / units::kHbar;
}

double fluence(const SampledField& f) {
  return fluence(f, f.grid.t_start, f.grid.t_end() + f.grid.dt);
}

double fluence(const SampledField& f, double t_from, double t_to) {
  double acc = 0.0;
  for (std::size_t k = 0; k < f.values.size(); ++k) {
    const double t = f.grid.time(k);
    if (t < t_from || t >= t_to) continue;
    double w = f.grid.dt;
    if (!f.piecewise_constant && (k == 0 || k + 1 == f.values.size())) w *= 0.5;
    acc += f.values[k] * f.values[k] * w;
  }
  return acc;
}

std::vector<double> amplitude_envelope(const SampledField& f) {
  const std::size_t n = f.values.size();
  std::vector<double> a(n);
  if (f.has_envelope()) {
    for (std::size_t k = 0; k < n; ++k) a[k] = std::abs(f.envelope[k]);
    return a;
  }
  if (n == 0) return a;
  fftw_complex* spec = fftw_alloc_complex(n);
  double* in = fftw_alloc_real(n);
  fftw_plan fwd, bwd;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fwd = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, spec, FFTW_ESTIMATE);
    bwd = fftw_plan_dft_1d(static_cast<int>(n), spec, spec, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  std::copy(f.values.begin(), f.values.end(), in);
  fftw_execute(fwd);
  // r2c fills bins 0..n/2; build the analytic spectrum in place.
  const std::size_t half = n / 2;
  for (std::size_t k = 1; k < (n + 1) / 2; ++k) {
    spec[k][0] *= 2.0;
    spec[k][1] *= 2.0;
  }
  for (std::size_t k = half + 1; k < n; ++k) spec[k][0] = spec[k][1] = 0.0;
  fftw_execute(bwd);
  for (std::size_t k = 0; k < n; ++k) a[k] = std::hypot(spec[k][0], spec[k][1]) / static_cast<double>(n);
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
  }
  fftw_free(spec);
  fftw_free(in);
  return a;
}

PulseShape analyze_shape(const SampledField& f, double window_fs) {
  PulseShape s;
  s.window = window_fs;
  const auto a = amplitude_envelope(f);
  if (a.empty()) return s;
  const std::size_t ip = static_cast<std::size_t>(std::max_element(a.begin(), a.end()) - a.begin());
  s.peak_time = f.grid.time(ip);
  s.peak_value = a[ip];
  if (a[ip] <= 0) return s;
  const double half = 0.5 * a[ip];
  std::size_t l = ip, r = ip;
  while (l > 0 && a[l - 1] >= half) --l;
  while (r + 1 < a.size() && a[r + 1] >= half) ++r;
  double tl = f.grid.time(l), tr = f.grid.time(r);
  if (l > 0) tl -= f.grid.dt * (a[l] - half) / (a[l] - a[l - 1]);
  if (r + 1 < a.size()) tr += f.grid.dt * (a[r] - half) / (a[r] - a[r + 1]);
  s.fwhm = tr - tl;

  const std::size_t w = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(window_fs / f.grid.dt)));
  double total = 0.0;
  for (double v : a) total += v * v;
  if (total <= 0) return s;
  double run = 0.0, best = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    run += a[k] * a[k];
    if (k >= w) run -= a[k - w] * a[k - w];
    best = std::max(best, run);
  }
  s.max_window_fraction = best / total;
  return s;
}

Spectrogram spectrogram(const SampledField& f, const SpectrogramOptions& opt) {
  Spectrogram out;
  const std::size_t n = f.values.size();
  if (n < 2) return out;
  const double dt = f.grid.dt;
  const double sigma = opt.window_fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
  const std::size_t half_len = static_cast<std::size_t>(std::ceil(4.0 * sigma / dt));
  const std::size_t nfft = next_pow2(std::max<std::size_t>(4 * (2 * half_len + 1), 4096));
  const double df = 1.0 / (static_cast<double>(nfft) * dt) / units::kSpeedOfLightCmPerFs;  // cm^-1 per bin
  const bool cplx = f.has_envelope();
  const double shift = cplx ? f.carrier : 0.0;

  std::vector<std::size_t> bins;
  for (std::size_t k = 0; k < nfft; ++k) {
    double nu = static_cast<double>(k) * df;
    if (cplx && k >= nfft / 2) nu -= static_cast<double>(nfft) * df;
    if (!cplx && k > nfft / 2) continue;
    const double fr = nu + shift;
    if (fr >= opt.freq_min && fr <= opt.freq_max) {
      bins.push_back(k);
      out.frequencies.push_back(fr);
    }
  }
  std::vector<std::size_t> order(bins.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return out.frequencies[a] < out.frequencies[b];
  });
  {
    std::vector<std::size_t> b2;
    std::vector<double> f2;
    for (auto i : order) {
      b2.push_back(bins[i]);
      f2.push_back(out.frequencies[i]);
    }
    bins.swap(b2);
    out.frequencies.swap(f2);
  }

  for (double t = f.grid.t_start; t <= f.grid.t_end() + 1e-9; t += opt.time_step) out.times.push_back(t);
  out.intensity.setZero(static_cast<Eigen::Index>(bins.size()), static_cast<Eigen::Index>(out.times.size()));
  if (bins.empty()) return out;

  fftw_complex* buf = fftw_alloc_complex(nfft);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_dft_1d(static_cast<int>(nfft), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  for (std::size_t it = 0; it < out.times.size(); ++it) {
    std::fill(&buf[0][0], &buf[0][0] + 2 * nfft, 0.0);
    const double tc = out.times[it];
    const long center = std::lround((tc - f.grid.t_start) / dt);
    for (long j = -static_cast<long>(half_len); j <= static_cast<long>(half_len); ++j) {
      const long k = center + j;
      if (k < 0 || k >= static_cast<long>(n)) continue;
      const double x = (static_cast<double>(j) * dt) / sigma;
      const double g = std::exp(-0.5 * x * x);
      const std::size_t slot = static_cast<std::size_t>((j + static_cast<long>(nfft)) % static_cast<long>(nfft));
      if (cplx) {
        buf[slot][0] = g * f.envelope[k].real();
        buf[slot][1] = -g * f.envelope[k].imag();
      } else {
        buf[slot][0] = g * f.values[k];
      }
    }
    fftw_execute(plan);
    for (std::size_t b = 0; b < bins.size(); ++b) {
      const auto& c = buf[bins[b]];
      out.intensity(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(it)) = c[0] * c[0] + c[1] * c[1];
    }
  }
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(buf);
  const double mx = out.intensity.maxCoeff();
  if (mx > 0) out.intensity /= mx;
  return out;
}

void project_band(SampledField& f, double freq_lo, double freq_hi) {
  const std::size_t n = f.values.size();
  if (n < 2) return;
  double* in = fftw_alloc_real(n);
  fftw_complex* spec = fftw_alloc_complex(n / 2 + 1);
  fftw_plan fwd, bwd;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fwd = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, spec, FFTW_ESTIMATE);
    bwd = fftw_plan_dft_c2r_1d(static_cast<int>(n), spec, in, FFTW_ESTIMATE);
  }
  std::copy(f.values.begin(), f.values.end(), in);
  fftw_execute(fwd);
  const double df = 1.0 / (static_cast<double>(n) * f.grid.dt) / units::kSpeedOfLightCmPerFs;
  for (std::size_t k = 0; k <= n / 2; ++k) {
    const double nu = static_cast<double>(k) * df;
    if (nu < freq_lo || nu > freq_hi) spec[k][0] = spec[k][1] = 0.0;
  }
  fftw_execute(bwd);
  for (std::size_t k = 0; k < n; ++k) f.values[k] = in[k] / static_cast<double>(n);
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
  }
  fftw_free(in);
  fftw_free(spec);
}

}  // namespace isomctl
