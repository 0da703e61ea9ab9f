#include "isomctl/units.hpp"

#include <cmath>

namespace isomctl::units {

namespace {

constexpr double kHartreeSI = 4.3597447222071e-18;   // J
constexpr double kBohrSI = 5.29177210903e-11;        // m
constexpr double kHcSI_cm = kPlanckSI * kSpeedOfLightSI * 1e2;  // J cm

}  // namespace

double rotational_constant(double inertia_amu_a2) {
  const double inertia_si = inertia_amu_a2 * kAtomicMassUnitSI * 1e-20;
  return kPlanckSI / (8.0 * kPi * kPi * kSpeedOfLightSI * 1e2 * inertia_si);
}

Dimension dimension_of(Unit u) {
  switch (u) {
    case Unit::Wavenumber:
    case Unit::RadPerFs:
    case Unit::ElectronVolt:
    case Unit::Joule:
    case Unit::Hartree:
      return Dimension::Energy;
    case Unit::Femtosecond:
    case Unit::Picosecond:
    case Unit::Second:
      return Dimension::Time;
    case Unit::Debye:
    case Unit::CoulombMeter:
    case Unit::AtomicDipole:
      return Dimension::Dipole;
    case Unit::MVPerM:
    case Unit::VPerM:
    case Unit::AtomicField:
      return Dimension::Field;
    case Unit::AmuAngstrom2:
    case Unit::KgM2:
      return Dimension::MomentOfInertia;
    case Unit::Radian:
    case Unit::Degree:
      return Dimension::Angle;
    case Unit::Kelvin:
      return Dimension::Temperature;
  }
  throw std::logic_error("unknown unit");
}

std::string_view name(Unit u) {
  switch (u) {
    case Unit::Wavenumber: return "cm^-1";
    case Unit::RadPerFs: return "rad/fs";
    case Unit::ElectronVolt: return "eV";
    case Unit::Joule: return "J";
    case Unit::Hartree: return "Eh";
    case Unit::Femtosecond: return "fs";
    case Unit::Picosecond: return "ps";
    case Unit::Second: return "s";
    case Unit::Debye: return "D";
    case Unit::CoulombMeter: return "C*m";
    case Unit::AtomicDipole: return "e*a0";
    case Unit::MVPerM: return "MV/m";
    case Unit::VPerM: return "V/m";
    case Unit::AtomicField: return "Eh/(e*a0)";
    case Unit::AmuAngstrom2: return "amu*A^2";
    case Unit::KgM2: return "kg*m^2";
    case Unit::Radian: return "rad";
    case Unit::Degree: return "deg";
    case Unit::Kelvin: return "K";
  }
  return "?";
}

std::string_view name(Dimension d) {
  switch (d) {
    case Dimension::Energy: return "energy";
    case Dimension::Time: return "time";
    case Dimension::Dipole: return "dipole";
    case Dimension::Field: return "electric field";
    case Dimension::MomentOfInertia: return "moment of inertia";
    case Dimension::Angle: return "angle";
    case Dimension::Temperature: return "temperature";
  }
  return "?";
}

double to_internal_factor(Unit u) {
  switch (u) {
    case Unit::Wavenumber: return 1.0;
    case Unit::RadPerFs: return 1.0 / kWavenumberToAngular;
    case Unit::ElectronVolt: return kElementaryChargeSI / kHcSI_cm;
    case Unit::Joule: return 1.0 / kHcSI_cm;
    case Unit::Hartree: return kHartreeSI / kHcSI_cm;
    case Unit::Femtosecond: return 1.0;
    case Unit::Picosecond: return 1e3;
    case Unit::Second: return 1e15;
    case Unit::Debye: return 1.0;
    case Unit::CoulombMeter: return 1.0 / kDebyeSI;
    case Unit::AtomicDipole: return kElementaryChargeSI * kBohrSI / kDebyeSI;
    case Unit::MVPerM: return 1.0;
    case Unit::VPerM: return 1e-6;
    case Unit::AtomicField: return kHartreeSI / (kElementaryChargeSI * kBohrSI) * 1e-6;
    case Unit::AmuAngstrom2: return 1.0;
    case Unit::KgM2: return 1.0 / (kAtomicMassUnitSI * 1e-20);
    case Unit::Radian: return 1.0;
    case Unit::Degree: return kPi / 180.0;
    case Unit::Kelvin: return 1.0;
  }
  throw std::logic_error("unknown unit");
}

double convert(double value, Unit from, Unit to) {
  const Dimension df = dimension_of(from);
  const Dimension dt = dimension_of(to);
  if (df != dt) {
    throw DimensionError("cannot convert " + std::string(name(from)) + " (" +
                         std::string(name(df)) + ") to " + std::string(name(to)) + " (" +
                         std::string(name(dt)) + ")");
  }
  if (from == to) return value;
  return value * (to_internal_factor(from) / to_internal_factor(to));
}

}  // namespace isomctl::units
