#pragma once

// Run configuration: JSON schema, defaults, overrides and validation.

#include "isomctl/bath.hpp"
#include "isomctl/field.hpp"
#include "isomctl/ga.hpp"
#include "isomctl/model.hpp"
#include "isomctl/oct.hpp"
#include "isomctl/propagator.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace isomctl {

inline constexpr const char* kConfigSchema = "isomctl.config/1";

enum class Mode { Eigen, Propagate, GaMax, GaMin, OctMax, OctMin, Spectrum };
const char* to_string(Mode m);
std::optional<Mode> parse_mode(const std::string& s);

/// Collected diagnostics; each entry reads "<path>: <message>" with a line when known.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> diagnostics);
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<std::string> diagnostics_;
};

enum class PhaseInit { Explicit, Zero, Random };

struct RunSection {
  Mode mode = Mode::Propagate;
  double target_time = 20000.0;  // fs
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  bool cache = true;
  double area_dt = 0.02;  // fs, pulse-area quadrature
  ObjectiveKind ga_max_objective = ObjectiveKind::CisOverArea;
  ObjectiveKind ga_min_objective = ObjectiveKind::MinusCisOverArea;
  int checkpoint_every = 1;  // GA generations between checkpoints
  SpectrogramOptions spectrogram;
};

struct RunConfig {
  ModelSpec model;
  BathSpec bath;
  FieldSpec field;
  PhaseInit phase_init = PhaseInit::Zero;
  PropagatorOptions propagator;
  GAConfig ga;
  OctConfig oct;
  RunSection run;
};

/// Full default configuration as JSON.
nlohmann::json default_config_json();
nlohmann::json to_json(const RunConfig& cfg);

/// Strict conversion: unknown keys, wrong types and invalid values are all reported.
/// `source` (the original file text) lets diagnostics carry line numbers.
RunConfig parse_config(const nlohmann::json& doc, const std::string& source = {});

/// Parses text; syntax errors report line and column.
nlohmann::json parse_config_text(const std::string& text, const std::string& origin);

/// "a.b.c=value"; value is JSON when it parses as JSON, otherwise a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Random phases drawn from the run seed when phase_init is Random.
void resolve_phases(RunConfig& cfg, std::uint64_t seed);

std::string config_hash(const nlohmann::json& resolved);

}  // namespace isomctl
