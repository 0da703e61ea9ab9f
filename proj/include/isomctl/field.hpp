#pragma once

// Laser fields: the 128-component phase-shaped pulse, free-form sampled
// fields, pulse area, envelopes and spectrograms.

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace isomctl {

class FieldError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Where each carrier has zero phase shift: at t = 0 (Origin) or at t = t0 (CenterTime).
enum class CarrierReference { Origin, CenterTime };

struct FieldSpec {
  double amplitude = 5.0;       // MV/m per component
  double t0 = 2000.0;           // fs
  double width = 2000.0;        // fs, envelope exp(-((t - t0) / (2 width))^2)
  double omega0 = 25000.0;      // cm^-1
  double delta_omega = 200.0;   // cm^-1
  std::vector<double> frequencies = default_frequencies();  // cm^-1
  std::vector<double> phases = std::vector<double>(128, 0.0);  // rad, [0, 2pi)
  CarrierReference reference = CarrierReference::CenterTime;

  static std::vector<double> default_frequencies();
  /// Stores phases wrapped into [0, 2pi).
  void set_phases(const std::vector<double>& theta);
  double carrier_origin() const { return reference == CarrierReference::CenterTime ? t0 : 0.0; }
  /// Spectral weight amplitude * exp(-((omega_i - omega0) / (2 delta_omega))^2).
  std::vector<double> component_amplitudes() const;
  void validate() const;
};

double wrap_phase(double theta);

struct TimeGrid {
  double t_start = 0.0;  // fs
  double dt = 0.02;      // fs
  std::size_t n = 0;     // sample count

  double time(std::size_t k) const { return t_start + dt * static_cast<double>(k); }
  double t_end() const { return n ? time(n - 1) : t_start; }
  static TimeGrid covering(double t_start, double t_end, double dt);
};

enum class Provenance { ConstrainedExpansion, OctFree, Zero };
const char* to_string(Provenance p);

struct SampledField {
  TimeGrid grid;
  std::vector<double> values;  // MV/m at grid nodes (or per step when piecewise_constant)
  Provenance provenance = Provenance::Zero;
  bool piecewise_constant = false;  // values[k] holds on [t_k, t_k + dt)

  // Optional complex envelope: E(t) = Re[env(t) exp(-i carrier (t - carrier_origin))].
  std::vector<std::complex<double>> envelope;
  double carrier = 0.0;         // cm^-1
  double carrier_origin = 0.0;  // fs

  bool has_envelope() const { return !envelope.empty(); }
  double max_abs() const;
  static SampledField zero(const TimeGrid& grid);
};

/// Largest dt that keeps 20 samples per optical period of the fastest component.
double max_sampling_dt(const FieldSpec& spec);

/// Direct cosine sum at one time; reference evaluation.
double evaluate(const FieldSpec& spec, double t);

/// Real field on the grid. Throws FieldError when the grid undersamples the carrier.
SampledField synthesize(const FieldSpec& spec, const TimeGrid& grid);

/// Complex envelope about omega0 on the grid (real values filled at nodes too).
SampledField synthesize_envelope(const FieldSpec& spec, const TimeGrid& grid);

/// mu_ge * integral |E| dt / hbar, trapezoid (rectangle sum for piecewise-constant fields).
double pulse_area(const SampledField& f, double mu_ge);

/// Pulse area of the constrained field on [t_start, t_end], sampled at dt.
double pulse_area(const FieldSpec& spec, double mu_ge, double t_start, double t_end, double dt = 0.02);

/// integral E^2 dt, (MV/m)^2 fs.
double fluence(const SampledField& f);
double fluence(const SampledField& f, double t_from, double t_to);

/// Instantaneous amplitude |E| envelope: |env| when present, else analytic-signal magnitude.
std::vector<double> amplitude_envelope(const SampledField& f);

struct PulseShape {
  double peak_time = 0.0;   // fs
  double peak_value = 0.0;  // MV/m
  double fwhm = 0.0;        // fs, contiguous half-maximum region around the peak
  double max_window_fraction = 0.0;  // largest fluence fraction inside any window of length `window`
  double window = 0.0;
};

PulseShape analyze_shape(const SampledField& f, double window_fs = 200.0);

struct Spectrogram {
  std::vector<double> times;        // fs
  std::vector<double> frequencies;  // cm^-1
  Eigen::MatrixXd intensity;        // frequencies x times, unit maximum
};

struct SpectrogramOptions {
  double window_fwhm = 150.0;  // fs, Gaussian
  double time_step = 20.0;     // fs between window centers
  double freq_min = 24000.0;   // cm^-1
  double freq_max = 26000.0;   // cm^-1
};

Spectrogram spectrogram(const SampledField& f, const SpectrogramOptions& opt = {});

/// Removes spectral content outside [freq_lo, freq_hi] cm^-1 from a real sampled field.
void project_band(SampledField& f, double freq_lo, double freq_hi);

}  // namespace isomctl
