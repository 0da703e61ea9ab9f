#pragma once

// Mode drivers shared by the command-line tool and the acceptance suite.
// Each driver writes its artifacts into the output directory and returns
// the summary document it also stores as summary.json.

#include "isomctl/config.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>

namespace isomctl {

/// Numerical failure after the run started; `dump` names the diagnostics file.
class NumericalAbort : public std::runtime_error {
 public:
  NumericalAbort(const std::string& what, std::filesystem::path dump)
      : std::runtime_error(what), dump_(std::move(dump)) {}
  const std::filesystem::path& dump() const { return dump_; }

 private:
  std::filesystem::path dump_;
};

struct RunContext {
  RunConfig cfg;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  EigenSystem es;
  RedfieldTensors tensors;
  std::function<void(const std::string&)> log;  // progress lines; may be empty
};

/// Eigensystem from the cache directory when present, else built (and stored when cache is on).
EigenSystem load_or_build_eigensystem(const ModelSpec& spec, bool use_cache);

/// Resolves phases, builds the model and tensors; creates the output directory.
RunContext make_context(RunConfig cfg, std::uint64_t seed, const std::filesystem::path& out,
                        std::function<void(const std::string&)> log = {});

nlohmann::json run_mode(RunContext& ctx);

nlohmann::json run_eigen(RunContext& ctx);
nlohmann::json run_propagate(RunContext& ctx);
nlohmann::json run_spectrum(RunContext& ctx);
nlohmann::json run_ga_mode(RunContext& ctx, bool maximize, bool resume = false);
nlohmann::json run_oct_mode(RunContext& ctx, bool maximize);

/// Post-analysis of an optimal-control field.
struct OctAnalysis {
  double fluence = 0.0;
  double pump_fraction = 0.0;  // t < pump_end
  double dump_fraction = 0.0;  // dump_begin <= t < dump_end
  double tail_fraction = 0.0;  // t >= dump_end
  double final_cis = 0.0;
  double max_pe = 0.0;
  double pe_after_pump = 0.0;    // P_e at dump_begin
  double direct_transfer = 0.0;  // P_cis(dump_end) minus the same with the field cut at the gap midpoint
  double interpulse_coherence = 0.0;  // smallest coherence norm between pump_end and dump_begin
  TrajectoryRecord trajectory;
};

struct OctWindows {
  double pump_end = 20.0;    // fs
  double dump_begin = 30.0;  // fs
  double dump_end = 150.0;   // fs
};

OctAnalysis analyze_oct_field(const Propagator& exact, const DensityMatrix& rho0, const SampledField& field,
                              double target_time, const OctWindows& w = {});

/// Writes trajectory rows: t_fs, P_trans, P_cis, P_e, coh_norm, E_field.
void write_trajectory_csv(const std::filesystem::path& path, const TrajectoryRecord& tr);
/// t_fs, E_field (MV/m).
void write_field_csv(const std::filesystem::path& path, const SampledField& f);
/// t_fs, freq_cm, intensity triples.
void write_spectrogram_csv(const std::filesystem::path& path, const Spectrogram& s);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

/// Library and dependency versions for manifests.
std::string tool_versions();

}  // namespace isomctl
