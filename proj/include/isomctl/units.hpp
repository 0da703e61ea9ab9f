#pragma once

// Physical constants and unit conversions.
//
// Internal unit system:
//   energy / frequency   cm^-1 (hbar folded in: omega_ji = lambda_j - lambda_i)
//   angular frequency    rad/fs, only where an explicit rate or phase is needed
//   time                 fs
//   dipole               Debye
//   electric field       MV/m
//   moment of inertia    amu * Angstrom^2
// Products dipole * field are converted to cm^-1 with kDebyeMVPerMToWavenumber.

#include <stdexcept>
#include <string>
#include <string_view>

namespace isomctl::units {

// CODATA 2018 (exact SI defining constants where applicable).
inline constexpr double kSpeedOfLightSI = 299792458.0;       // m/s
inline constexpr double kPlanckSI = 6.62607015e-34;          // J s
inline constexpr double kBoltzmannSI = 1.380649e-23;         // J/K
inline constexpr double kElementaryChargeSI = 1.602176634e-19;  // C
inline constexpr double kAtomicMassUnitSI = 1.66053906660e-27;  // kg
inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double kSpeedOfLightCmPerFs = kSpeedOfLightSI * 1e2 * 1e-15;

/// rad/fs per cm^-1.
inline constexpr double kWavenumberToAngular = 2.0 * kPi * kSpeedOfLightCmPerFs;

/// hbar in cm^-1 * fs; equals 1/(2 pi c).
inline constexpr double kHbar = 1.0 / kWavenumberToAngular;

/// Boltzmann constant in cm^-1 / K.
inline constexpr double kBoltzmann = kBoltzmannSI / (kPlanckSI * kSpeedOfLightSI * 1e2);

/// 1 Debye in C m (1e-21 / c).
inline constexpr double kDebyeSI = 1e-21 / kSpeedOfLightSI;

/// Energy (cm^-1) of a 1 Debye dipole in a 1 MV/m field.
inline constexpr double kDebyeMVPerMToWavenumber =
    kDebyeSI * 1e6 / (kPlanckSI * kSpeedOfLightSI * 1e2);

/// Rotational constant hbar^2 / (2 I) in cm^-1 for I in amu * Angstrom^2.
double rotational_constant(double inertia_amu_a2);

/// k_b * T in cm^-1.
constexpr double thermal_energy(double temperature_k) { return kBoltzmann * temperature_k; }

enum class Dimension { Energy, Time, Dipole, Field, MomentOfInertia, Angle, Temperature };

enum class Unit {
  Wavenumber,     // cm^-1 (internal energy)
  RadPerFs,       // angular frequency
  ElectronVolt,
  Joule,
  Hartree,
  Femtosecond,    // internal time
  Picosecond,
  Second,
  Debye,          // internal dipole
  CoulombMeter,
  AtomicDipole,
  MVPerM,         // internal field
  VPerM,
  AtomicField,
  AmuAngstrom2,   // internal moment of inertia
  KgM2,
  Radian,         // internal angle
  Degree,
  Kelvin,
};

Dimension dimension_of(Unit u);
std::string_view name(Unit u);
std::string_view name(Dimension d);

/// Factor f such that value_internal = f * value_in_unit.
double to_internal_factor(Unit u);

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Converts between units of the same dimension; throws DimensionError otherwise.
double convert(double value, Unit from, Unit to);

inline double to_internal(double value, Unit from) { return value * to_internal_factor(from); }
inline double from_internal(double value, Unit to) { return value / to_internal_factor(to); }

}  // namespace isomctl::units
