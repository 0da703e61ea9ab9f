#include "isomctl/workflow.hpp"

#include "isomctl/io.hpp"

#include <Eigen/Core>
#include <fftw3.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace isomctl {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void say(const RunContext& ctx, const std::string& line) {
  if (ctx.log) ctx.log(line);
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json record_json(const TrajectoryRecord& tr) {
  const double depleted = tr.initial_trans - tr.final_trans;
  const double created = tr.final_cis - tr.initial_cis;
  return {{"initial", {{"trans", tr.initial_trans}, {"cis", tr.initial_cis}}},
          {"final", {{"trans", tr.final_trans}, {"cis", tr.final_cis}, {"excited", tr.final_e}}},
          {"pulse_area", tr.pulse_area},
          {"ratio", tr.ratio()},
          {"objectives",
           {{"CIS_OVER_AREA", objective(tr, ObjectiveKind::CisOverArea)},
            {"CIS", objective(tr, ObjectiveKind::Cis)},
            {"MINUS_CIS_OVER_AREA", objective(tr, ObjectiveKind::MinusCisOverArea)}}},
          {"max_pe", tr.max_pe},
          {"max_trace_error", tr.max_trace_error},
          {"min_population", tr.min_population},
          {"created_over_depleted", finite_or_null(std::abs(depleted) > 0 ? created / depleted : NAN)},
          {"field_steps", tr.field_steps},
          {"fast_path_time_fs", tr.fast_path_time}};
}

json shape_json(const PulseShape& s) {
  return {{"peak_time_fs", s.peak_time},
          {"peak_envelope", s.peak_value},
          {"fwhm_fs", s.fwhm},
          {"max_window_fraction", s.max_window_fraction},
          {"window_fs", s.window}};
}

PropagatorOptions propagator_options(const RunConfig& cfg) {
  PropagatorOptions p = cfg.propagator;
  p.rwa_carrier = cfg.field.omega0;
  return p;
}

DensityMatrix initial_state(const RunContext& ctx) { return thermal_state(ctx.es, ctx.cfg.model.temperature); }

/// Runs the constrained field in the configured coupling.
TrajectoryRecord propagate_constrained(const Propagator& prop, const RunContext& ctx, const FieldSpec& spec) {
  const auto& c = ctx.cfg;
  if (prop.options().coupling == Coupling::Rwa) {
    return run_constrained(prop, spec, c.model.mu_ge, c.model.temperature, c.run.target_time, c.run.area_dt);
  }
  const SampledField f = synthesize(spec, prop.field_grid(c.run.target_time));
  TrajectoryRecord tr = prop.propagate(initial_state(ctx), f, c.run.target_time);
  tr.pulse_area = pulse_area(spec, c.model.mu_ge, 0.0, c.run.target_time, c.run.area_dt);
  return tr;
}

/// Envelope field for shape analysis and spectrograms.
SampledField envelope_field(const FieldSpec& spec, double t_end) {
  return synthesize_envelope(spec, TimeGrid::covering(0.0, t_end, 0.5));
}

/// Real field on a grid that resolves the carrier.
SampledField carrier_field(const FieldSpec& spec, double t_end) {
  return synthesize(spec, TimeGrid::covering(0.0, t_end, max_sampling_dt(spec)));
}

void write_constrained_outputs(const RunContext& ctx, const FieldSpec& spec, const TrajectoryRecord& tr) {
  write_trajectory_csv(ctx.out / "trajectory.csv", tr);
  write_field_csv(ctx.out / "field.csv", carrier_field(spec, ctx.cfg.run.target_time));
  write_spectrogram_csv(ctx.out / "spectrogram.csv",
                        spectrogram(envelope_field(spec, ctx.cfg.run.target_time), ctx.cfg.run.spectrogram));
}

json phases_of(const FieldSpec& f) { return f.phases; }

std::string version_string() {
  std::ostringstream os;
  os << "isomctl 0.1.0; eigen " << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "." << EIGEN_MINOR_VERSION
     << "; fftw " << fftw_version;
  return os.str();
}

}  // namespace

void write_json(const fs::path& path, const json& j) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream o(tmp);
    if (!o) throw std::runtime_error("cannot write " + tmp.string());
    o << j.dump(2) << "\n";
  }
  fs::rename(tmp, path);
}

void write_trajectory_csv(const fs::path& path, const TrajectoryRecord& tr) {
  CsvWriter w(path, {"t_fs", "P_trans", "P_cis", "P_e", "coh_norm", "E_field"});
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    w << tr.times[k] << tr.p_trans[k] << tr.p_cis[k] << tr.p_e[k] << tr.coherence[k] << tr.field[k];
    w.endrow();
  }
}

void write_field_csv(const fs::path& path, const SampledField& f) {
  CsvWriter w(path, {"t_fs", "E_field"});
  for (std::size_t k = 0; k < f.values.size(); ++k) {
    w << f.grid.time(k) << f.values[k];
    w.endrow();
  }
}

void write_spectrogram_csv(const fs::path& path, const Spectrogram& s) {
  CsvWriter w(path, {"t_fs", "freq_cm", "intensity"});
  for (std::size_t j = 0; j < s.times.size(); ++j) {
    for (std::size_t i = 0; i < s.frequencies.size(); ++i) {
      w << s.times[j] << s.frequencies[i] << s.intensity(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      w.endrow();
    }
  }
}

EigenSystem load_or_build_eigensystem(const ModelSpec& spec, bool use_cache) {
  const fs::path path = cache_dir() / ("eigen-" + hex64(hash(spec)) + ".bin");
  if (use_cache) {
    if (auto es = load_eigensystem(path, spec)) return std::move(*es);
  }
  EigenSystem es = build_eigensystem(spec);
  if (use_cache) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (!ec) save_eigensystem(path, es);
  }
  return es;
}

RunContext make_context(RunConfig cfg, std::uint64_t seed, const fs::path& out,
                        std::function<void(const std::string&)> log) {
  RunContext ctx;
  resolve_phases(cfg, seed);
  cfg.ga.seed = seed;
  cfg.bath.temperature = cfg.model.temperature;
  ctx.cfg = std::move(cfg);
  ctx.seed = seed;
  ctx.out = out;
  ctx.log = std::move(log);
  fs::create_directories(out);
  ctx.es = load_or_build_eigensystem(ctx.cfg.model, ctx.cfg.run.cache);
  ctx.tensors = build_tensors(ctx.es, ctx.cfg.bath);
  return ctx;
}

json run_mode(RunContext& ctx) {
  switch (ctx.cfg.run.mode) {
    case Mode::Eigen: return run_eigen(ctx);
    case Mode::Propagate: return run_propagate(ctx);
    case Mode::Spectrum: return run_spectrum(ctx);
    case Mode::GaMax: return run_ga_mode(ctx, true);
    case Mode::GaMin: return run_ga_mode(ctx, false);
    case Mode::OctMax: return run_oct_mode(ctx, true);
    case Mode::OctMin: return run_oct_mode(ctx, false);
  }
  throw std::logic_error("unhandled mode");
}

json run_eigen(RunContext& ctx) {
  const auto& es = ctx.es;
  CsvWriter w(ctx.out / "states.csv", {"index", "energy_cm", "label", "parity", "ground_weight", "cos_phi"});
  for (int i = 0; i < es.size(); ++i) {
    w << i << es.energies(i) << std::string(to_string(es.labels[i])) << std::string(to_string(es.parity[i]))
      << es.ground_weight(i) << es.cos_phi(i);
    w.endrow();
  }
  json s = {{"mode", "eigen"},
            {"states", es.size()},
            {"grid_points", es.n_grid},
            {"trans_count", es.trans.size()},
            {"cis_count", es.cis.size()},
            {"excited_count", es.excited.size()},
            {"lowest_energy_cm", es.energies(0)},
            {"highest_energy_cm", es.energies(es.size() - 1)},
            {"trans_states", es.trans},
            {"cis_states", es.cis}};
  write_json(ctx.out / "summary.json", s);
  return s;
}

json run_propagate(RunContext& ctx) {
  const Propagator prop(ctx.es, ctx.tensors, propagator_options(ctx.cfg));
  say(ctx, "propagating to " + format_double(ctx.cfg.run.target_time) + " fs");
  const TrajectoryRecord tr = propagate_constrained(prop, ctx, ctx.cfg.field);
  write_constrained_outputs(ctx, ctx.cfg.field, tr);
  json s = record_json(tr);
  s["mode"] = "propagate";
  s["coupling"] = to_string(prop.options().coupling);
  s["pulse_shape"] = shape_json(analyze_shape(envelope_field(ctx.cfg.field, ctx.cfg.run.target_time)));
  s["phases"] = phases_of(ctx.cfg.field);
  write_json(ctx.out / "summary.json", s);
  return s;
}

json run_spectrum(RunContext& ctx) {
  const double t_end = ctx.cfg.run.target_time;
  const SampledField env = envelope_field(ctx.cfg.field, t_end);
  write_field_csv(ctx.out / "field.csv", carrier_field(ctx.cfg.field, t_end));
  write_spectrogram_csv(ctx.out / "spectrogram.csv", spectrogram(env, ctx.cfg.run.spectrogram));
  json s = {{"mode", "spectrum"},
            {"pulse_area", pulse_area(ctx.cfg.field, ctx.cfg.model.mu_ge, 0.0, t_end, ctx.cfg.run.area_dt)},
            {"fluence", fluence(env)},
            {"pulse_shape", shape_json(analyze_shape(env))}};
  write_json(ctx.out / "summary.json", s);
  return s;
}

json run_ga_mode(RunContext& ctx, bool maximize, bool resume) {
  const auto& c = ctx.cfg;
  const Propagator prop(ctx.es, ctx.tensors, propagator_options(c));
  const ObjectiveKind kind = maximize ? c.run.ga_max_objective : c.run.ga_min_objective;
  const Evaluator eval = [&](const Genome& g) {
    FieldSpec s = c.field;
    s.set_phases(g);
    return objective(propagate_constrained(prop, ctx, s), kind);
  };

  FieldSpec flat = c.field;
  flat.set_phases(std::vector<double>(flat.frequencies.size(), 0.0));
  const TrajectoryRecord base = propagate_constrained(prop, ctx, flat);
  const double baseline = objective(base, kind);
  say(ctx, std::string("baseline ") + to_string(kind) + " = " + format_double(baseline));

  const fs::path ckpt = ctx.out / "checkpoint.json";
  std::optional<GAReport> start;
  if (resume) {
    start = load_checkpoint(ckpt, c.ga);
    if (start) say(ctx, "resuming at generation " + std::to_string(start->last.index));
  }
  const auto t0 = std::chrono::steady_clock::now();
  GAHooks hooks;
  hooks.on_generation = [&](const GAReport& rep) {
    write_history_csv(ctx.out / "ga_history.csv", rep.history);
    write_json(ctx.out / "best_genome.json",
               {{"generation", rep.last.index}, {"fitness", finite_or_null(rep.best_fitness)}, {"phases", rep.best}});
    if (rep.last.index % c.run.checkpoint_every == 0 || rep.last.index == c.ga.generations) {
      save_checkpoint(ckpt, c.ga, rep);
    }
    const double el = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto& h = rep.history.back();
    std::ostringstream os;
    os << "generation " << rep.last.index << "/" << c.ga.generations << " best " << format_double(h.best)
       << " mean " << format_double(h.mean) << " (" << static_cast<int>(el) << " s)";
    say(ctx, os.str());
  };
  const GAReport rep = run_ga(c.ga, static_cast<int>(c.field.frequencies.size()), eval, hooks, std::move(start));

  FieldSpec best = c.field;
  best.set_phases(rep.best);
  const TrajectoryRecord tr = propagate_constrained(prop, ctx, best);
  write_constrained_outputs(ctx, best, tr);
  const PulseShape shape = analyze_shape(envelope_field(best, c.run.target_time));

  json s = record_json(tr);
  s["mode"] = maximize ? "ga-max" : "ga-min";
  s["objective"] = to_string(kind);
  s["generations"] = rep.last.index;
  s["best_fitness"] = finite_or_null(rep.best_fitness);
  s["baseline_fitness"] = baseline;
  s["baseline"] = record_json(base);
  s["fitness_ratio"] = finite_or_null(rep.best_fitness / baseline);
  s["ratio_over_baseline"] = finite_or_null(tr.ratio() / base.ratio());
  s["pulse_shape"] = shape_json(shape);
  s["baseline_pulse_shape"] = shape_json(analyze_shape(envelope_field(flat, c.run.target_time)));
  s["phases"] = rep.best;
  write_json(ctx.out / "summary.json", s);
  return s;
}

OctAnalysis analyze_oct_field(const Propagator& prop, const DensityMatrix& rho0, const SampledField& field,
                              double target_time, const OctWindows& w) {
  OctAnalysis a;
  a.fluence = fluence(field);
  if (a.fluence > 0) {
    a.pump_fraction = fluence(field, 0.0, w.pump_end) / a.fluence;
    a.dump_fraction = fluence(field, w.dump_begin, w.dump_end) / a.fluence;
    a.tail_fraction = fluence(field, w.dump_end, std::numeric_limits<double>::infinity()) / a.fluence;
  }
  a.trajectory = prop.propagate(rho0, field, target_time);
  const auto& tr = a.trajectory;
  a.final_cis = tr.final_cis;
  a.max_pe = tr.max_pe;
  a.interpulse_coherence = std::numeric_limits<double>::infinity();
  double cis_at_dump_end = tr.final_cis;
  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    const double t = tr.times[k];
    if (t >= w.pump_end - 1e-9 && t <= w.dump_begin + 1e-9) {
      a.interpulse_coherence = std::min(a.interpulse_coherence, tr.coherence[k]);
    }
    if (std::abs(t - w.dump_begin) < best_gap) {
      best_gap = std::abs(t - w.dump_begin);
      a.pe_after_pump = tr.p_e[k];
    }
    if (t <= w.dump_end + 1e-9) cis_at_dump_end = tr.p_cis[k];
  }
  SampledField cut = field;
  const double t_cut = 0.5 * (w.pump_end + w.dump_begin);
  for (std::size_t k = 0; k < cut.values.size(); ++k) {
    if (cut.grid.time(k) >= t_cut) cut.values[k] = 0.0;
  }
  const TrajectoryRecord pump_only = prop.propagate(rho0, cut, w.dump_end);
  a.direct_transfer = cis_at_dump_end - pump_only.final_cis;
  return a;
}

json run_oct_mode(RunContext& ctx, bool maximize) {
  const auto& c = ctx.cfg;
  PropagatorOptions po = propagator_options(c);
  po.coupling = Coupling::Exact;
  po.dt = c.oct.dt;
  po.stride_field = 1.0;
  const Propagator prop(ctx.es, ctx.tensors, po);
  OctConfig oc = c.oct;
  oc.maximize = maximize;
  const DensityMatrix rho0 = initial_state(ctx);

  std::vector<OctIterate> hist;
  const auto t0 = std::chrono::steady_clock::now();
  auto write_history = [&] {
    CsvWriter w(ctx.out / "j_history.csv",
                {"iteration", "J", "cis_yield", "penalty", "fluence", "max_field", "rejected_steps"});
    for (const auto& h : hist) {
      w << h.iteration << h.J << h.yield << h.penalty << h.fluence << h.max_field << h.rejected_steps;
      w.endrow();
    }
  };
  OctHooks hooks;
  hooks.on_iteration = [&](const OctIterate& it, const SampledField&) {
    hist.push_back(it);
    write_history();
    const double el = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream os;
    os << "iteration " << it.iteration << " J " << format_double(it.J) << " cis " << format_double(it.yield)
       << " fluence " << format_double(it.fluence) << " (" << static_cast<int>(el) << " s)";
    say(ctx, os.str());
  };
  const OctReport rep = optimize(prop, rho0, oc, hooks);
  write_field_csv(ctx.out / "field.csv", rep.field);

  double worst = 0.0;
  for (std::size_t k = 1; k < rep.history.size(); ++k) {
    worst = std::min(worst, rep.history[k].J - rep.history[k - 1].J);
  }
  if (rep.stop_reason.rfind("monotonicity", 0) == 0 || rep.stop_reason.rfind("non-finite", 0) == 0) {
    const fs::path dump = ctx.out / "abort.json";
    write_json(dump, {{"reason", rep.stop_reason}, {"worst_dJ", worst}, {"dt_fs", oc.dt},
                      {"iterations", rep.history.size()}});
    throw NumericalAbort("optimal control aborted: " + rep.stop_reason, dump);
  }

  const OctAnalysis a = analyze_oct_field(prop, rho0, rep.field, oc.target_time);
  write_trajectory_csv(ctx.out / "trajectory.csv", a.trajectory);
  SpectrogramOptions so = c.run.spectrogram;
  so.window_fwhm = 20.0;
  so.time_step = 2.0;
  so.freq_min = 15000.0;
  so.freq_max = 35000.0;
  write_spectrogram_csv(ctx.out / "spectrogram.csv", spectrogram(rep.field, so));

  const auto& last = rep.history.back();
  json s = record_json(a.trajectory);
  s["mode"] = maximize ? "oct-max" : "oct-min";
  s["iterations"] = last.iteration;
  s["stop_reason"] = rep.stop_reason;
  s["converged"] = rep.converged;
  s["J"] = last.J;
  s["J_initial"] = rep.history.front().J;
  s["worst_dJ"] = worst;
  s["cis_yield"] = last.yield;
  s["fluence"] = a.fluence;
  s["alpha"] = oc.alpha;
  s["max_field"] = last.max_field;
  s["pump_fraction"] = a.pump_fraction;
  s["dump_fraction"] = a.dump_fraction;
  s["tail_fraction"] = a.tail_fraction;
  s["pe_after_pump"] = a.pe_after_pump;
  s["direct_transfer"] = a.direct_transfer;
  s["interpulse_coherence"] = a.interpulse_coherence;
  write_json(ctx.out / "summary.json", s);
  return s;
}

std::string tool_versions() { return version_string(); }

}  // namespace isomctl
