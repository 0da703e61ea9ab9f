#include "isomctl/config.hpp"

#include "isomctl/io.hpp"
#include "isomctl/units.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

namespace isomctl {

using nlohmann::json;

const char* to_string(Mode m) {
  switch (m) {
    case Mode::Eigen: return "eigen";
    case Mode::Propagate: return "propagate";
    case Mode::GaMax: return "ga-max";
    case Mode::GaMin: return "ga-min";
    case Mode::OctMax: return "oct-max";
    case Mode::OctMin: return "oct-min";
    case Mode::Spectrum: return "spectrum";
  }
  return "?";
}

std::optional<Mode> parse_mode(const std::string& s) {
  for (Mode m : {Mode::Eigen, Mode::Propagate, Mode::GaMax, Mode::GaMin, Mode::OctMax, Mode::OctMin, Mode::Spectrum}) {
    if (s == to_string(m)) return m;
  }
  return std::nullopt;
}

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : "\n") + x;
  return s;
}

const char* to_key(Coupling c) { return c == Coupling::Exact ? "exact" : "rwa"; }
const char* to_key(CarrierReference r) { return r == CarrierReference::CenterTime ? "center" : "origin"; }

json phases_json(const RunConfig& c) {
  switch (c.phase_init) {
    case PhaseInit::Zero: return "zero";
    case PhaseInit::Random: return "random";
    case PhaseInit::Explicit: return c.field.phases;
  }
  return "zero";
}

/// Walks the document, collecting every problem instead of stopping at the first.
class Reader {
 public:
  Reader(const json& doc, const std::string& source) : doc_(doc), source_(source) {}

  struct Section {
    const json* obj = nullptr;
    std::string path;
    std::set<std::string> used;
  };

  Section section(const char* name) {
    Section s;
    s.path = name;
    if (!doc_.contains(name)) return s;
    const json& v = doc_.at(name);
    if (!v.is_object()) {
      error(s.path, "expected an object");
      return s;
    }
    s.obj = &v;
    return s;
  }

  Section child(Section& parent, const char* name) {
    Section s;
    s.path = parent.path + "." + name;
    if (!parent.obj || !parent.obj->contains(name)) return s;
    parent.used.insert(name);
    const json& v = parent.obj->at(name);
    if (!v.is_object()) {
      error(s.path, "expected an object");
      return s;
    }
    s.obj = &v;
    return s;
  }

  const json* raw(Section& s, const char* key) {
    if (!s.obj || !s.obj->contains(key)) return nullptr;
    s.used.insert(key);
    return &s.obj->at(key);
  }

  void number(Section& s, const char* key, double& out) {
    if (const json* v = raw(s, key)) {
      if (v->is_number()) {
        out = v->get<double>();
      } else {
        error(s.path + "." + key, "expected a number");
      }
    }
  }

  void optional_number(Section& s, const char* key, std::optional<double>& out) {
    if (const json* v = raw(s, key)) {
      if (v->is_null()) {
        out.reset();
      } else if (v->is_number()) {
        out = v->get<double>();
      } else {
        error(s.path + "." + key, "expected a number or null");
      }
    }
  }

  void integer(Section& s, const char* key, int& out) {
    if (const json* v = raw(s, key)) {
      if (v->is_number_integer()) {
        out = v->get<int>();
      } else {
        error(s.path + "." + key, "expected an integer");
      }
    }
  }

  void boolean(Section& s, const char* key, bool& out) {
    if (const json* v = raw(s, key)) {
      if (v->is_boolean()) {
        out = v->get<bool>();
      } else {
        error(s.path + "." + key, "expected true or false");
      }
    }
  }

  void string(Section& s, const char* key, std::string& out) {
    if (const json* v = raw(s, key)) {
      if (v->is_string()) {
        out = v->get<std::string>();
      } else {
        error(s.path + "." + key, "expected a string");
      }
    }
  }

  void numbers(Section& s, const char* key, std::vector<double>& out) {
    if (const json* v = raw(s, key)) {
      if (!v->is_array() || !std::all_of(v->begin(), v->end(), [](const json& x) { return x.is_number(); })) {
        error(s.path + "." + key, "expected an array of numbers");
        return;
      }
      out = v->get<std::vector<double>>();
    }
  }

  template <class T, class Parse>
  void choice(Section& s, const char* key, T& out, Parse parse, const char* allowed) {
    std::string text;
    const std::size_t before = errors_.size();
    string(s, key, text);
    if (errors_.size() != before || text.empty()) return;
    if (auto v = parse(text)) {
      out = *v;
    } else {
      error(s.path + "." + key, "unknown value '" + text + "' (allowed: " + allowed + ")");
    }
  }

  void finish(const Section& s) {
    if (!s.obj) return;
    for (const auto& [k, v] : s.obj->items()) {
      if (!s.used.count(k)) error(s.path + "." + k, "unknown key");
    }
  }

  void error(const std::string& path, const std::string& msg) {
    std::ostringstream os;
    os << path;
    if (auto line = locate(path)) os << " (line " << *line << ")";
    os << ": " << msg;
    errors_.push_back(os.str());
  }

  /// Module validators throw; their message goes under the section path.
  template <class Fn>
  void check(const std::string& path, Fn&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      error(path, e.what());
    }
  }

  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::optional<int> locate(const std::string& path) const {
    if (source_.empty()) return std::nullopt;
    std::size_t pos = 0;
    std::size_t start = 0;
    while (start <= path.size()) {
      const std::size_t dot = path.find('.', start);
      const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      const std::size_t at = source_.find("\"" + key + "\"", pos);
      if (at == std::string::npos) return std::nullopt;
      pos = at;
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    return 1 + static_cast<int>(std::count(source_.begin(), source_.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
  }

  const json& doc_;
  const std::string& source_;
  std::vector<std::string> errors_;
};

std::optional<Coupling> parse_coupling(const std::string& s) {
  if (s == "rwa") return Coupling::Rwa;
  if (s == "exact") return Coupling::Exact;
  return std::nullopt;
}

std::optional<CarrierReference> parse_reference(const std::string& s) {
  if (s == "center") return CarrierReference::CenterTime;
  if (s == "origin") return CarrierReference::Origin;
  return std::nullopt;
}

std::optional<ObjectiveKind> parse_objective_opt(const std::string& s) {
  try {
    return parse_objective(s);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> diagnostics)
    : std::runtime_error("invalid configuration:\n" + join(diagnostics)), diagnostics_(std::move(diagnostics)) {}

json to_json(const RunConfig& c) {
  json j;
  j["schema"] = kConfigSchema;
  const auto& m = c.model;
  j["model"] = {{"inertia", m.inertia}, {"a0", m.a0},         {"a1", m.a1},
                {"a2", m.a2},           {"v_eg", m.v_eg},     {"mu_ge", m.mu_ge},
                {"n_grid", m.n_grid},   {"n_basis", m.n_basis}, {"e_max", m.e_max ? json(*m.e_max) : json(nullptr)},
                {"temperature", m.temperature}, {"trans_count", m.trans_count}, {"cis_count", m.cis_count}};
  j["bath"] = {{"eta", c.bath.eta}, {"omega_c", c.bath.omega_c}, {"rate_scale", c.bath.rate_scale}};
  const auto& f = c.field;
  j["field"] = {{"amplitude", f.amplitude}, {"t0", f.t0},
                {"width", f.width},         {"omega0", f.omega0},
                {"delta_omega", f.delta_omega}, {"frequencies", f.frequencies},
                {"phases", phases_json(c)}, {"reference", to_key(f.reference)}};
  const auto& p = c.propagator;
  j["propagator"] = {{"coupling", to_key(p.coupling)},   {"dt", p.dt},
                     {"rwa_cutoff", p.rwa_cutoff},       {"field_threshold", p.field_threshold},
                     {"trace_tolerance", p.trace_tolerance}, {"stride_field", p.stride_field},
                     {"stride_free", p.stride_free},     {"use_parity", p.use_parity},
                     {"parallel_sectors", p.parallel_sectors}};
  const auto& g = c.ga;
  j["ga"] = {{"population", g.population},
             {"survivors", g.survivors},
             {"mutation_children", g.mutation_children},
             {"crossover_children", g.crossover_children},
             {"generations", g.generations},
             {"sigma", g.sigma},
             {"gene_rate", g.gene_rate},
             {"threads", g.threads},
             {"objective_max", to_string(c.run.ga_max_objective)},
             {"objective_min", to_string(c.run.ga_min_objective)},
             {"checkpoint_every", c.run.checkpoint_every}};
  const auto& o = c.oct;
  j["oct"] = {{"target_time", o.target_time},
              {"window", o.window},
              {"dt", o.dt},
              {"alpha", o.alpha},
              {"max_iterations", o.max_iterations},
              {"stagnation", o.stagnation},
              {"stagnation_window", o.stagnation_window},
              {"monotonic_tolerance", o.monotonic_tolerance},
              {"checkpoint_stride", o.checkpoint_stride},
              {"safeguard", o.safeguard},
              {"band", o.band ? json::array({o.band->first, o.band->second}) : json(nullptr)},
              {"guess",
               {{"amplitude", o.guess.amplitude},
                {"center", o.guess.center},
                {"fwhm", o.guess.fwhm},
                {"carrier", o.guess.carrier}}}};
  const auto& r = c.run;
  j["run"] = {{"mode", to_string(r.mode)},
              {"target_time", r.target_time},
              {"out", r.out},
              {"seed", r.seed ? json(*r.seed) : json(nullptr)},
              {"cache", r.cache},
              {"area_dt", r.area_dt},
              {"spectrogram",
               {{"window_fwhm", r.spectrogram.window_fwhm},
                {"time_step", r.spectrogram.time_step},
                {"freq_min", r.spectrogram.freq_min},
                {"freq_max", r.spectrogram.freq_max}}}};
  return j;
}

json default_config_json() { return to_json(RunConfig{}); }

RunConfig parse_config(const json& doc, const std::string& source) {
  RunConfig c;
  Reader rd(doc, source);
  if (!doc.is_object()) throw ConfigError({"<root>: expected a JSON object"});

  std::set<std::string> top = {"schema", "model", "bath", "field", "propagator", "ga", "oct", "run"};
  for (const auto& [k, v] : doc.items()) {
    if (!top.count(k)) rd.error(k, "unknown section");
  }
  if (doc.contains("schema") && doc.at("schema") != kConfigSchema) {
    rd.error("schema", std::string("unsupported schema (expected ") + kConfigSchema + ")");
  }

  auto m = rd.section("model");
  rd.number(m, "inertia", c.model.inertia);
  rd.number(m, "a0", c.model.a0);
  rd.number(m, "a1", c.model.a1);
  rd.number(m, "a2", c.model.a2);
  rd.number(m, "v_eg", c.model.v_eg);
  rd.number(m, "mu_ge", c.model.mu_ge);
  rd.integer(m, "n_grid", c.model.n_grid);
  rd.integer(m, "n_basis", c.model.n_basis);
  rd.optional_number(m, "e_max", c.model.e_max);
  rd.number(m, "temperature", c.model.temperature);
  rd.integer(m, "trans_count", c.model.trans_count);
  rd.integer(m, "cis_count", c.model.cis_count);
  rd.finish(m);

  auto b = rd.section("bath");
  rd.number(b, "eta", c.bath.eta);
  rd.number(b, "omega_c", c.bath.omega_c);
  rd.number(b, "rate_scale", c.bath.rate_scale);
  rd.finish(b);
  c.bath.temperature = c.model.temperature;

  auto f = rd.section("field");
  rd.number(f, "amplitude", c.field.amplitude);
  rd.number(f, "t0", c.field.t0);
  rd.number(f, "width", c.field.width);
  rd.number(f, "omega0", c.field.omega0);
  rd.number(f, "delta_omega", c.field.delta_omega);
  rd.numbers(f, "frequencies", c.field.frequencies);
  if (const json* ph = rd.raw(f, "phases")) {
    if (ph->is_string() && *ph == "zero") {
      c.phase_init = PhaseInit::Zero;
      c.field.phases.assign(c.field.frequencies.size(), 0.0);
    } else if (ph->is_string() && *ph == "random") {
      c.phase_init = PhaseInit::Random;
      c.field.phases.assign(c.field.frequencies.size(), 0.0);
    } else if (ph->is_array() && std::all_of(ph->begin(), ph->end(), [](const json& x) { return x.is_number(); })) {
      c.phase_init = PhaseInit::Explicit;
      c.field.set_phases(ph->get<std::vector<double>>());
    } else {
      rd.error("field.phases", "expected \"zero\", \"random\" or an array of numbers");
    }
  } else {
    c.field.phases.assign(c.field.frequencies.size(), 0.0);
  }
  rd.choice(f, "reference", c.field.reference, parse_reference, "center, origin");
  rd.finish(f);

  auto p = rd.section("propagator");
  rd.choice(p, "coupling", c.propagator.coupling, parse_coupling, "rwa, exact");
  rd.number(p, "dt", c.propagator.dt);
  rd.number(p, "rwa_cutoff", c.propagator.rwa_cutoff);
  rd.number(p, "field_threshold", c.propagator.field_threshold);
  rd.number(p, "trace_tolerance", c.propagator.trace_tolerance);
  rd.number(p, "stride_field", c.propagator.stride_field);
  rd.number(p, "stride_free", c.propagator.stride_free);
  rd.boolean(p, "use_parity", c.propagator.use_parity);
  rd.boolean(p, "parallel_sectors", c.propagator.parallel_sectors);
  rd.finish(p);
  c.propagator.rwa_carrier = c.field.omega0;

  auto g = rd.section("ga");
  rd.integer(g, "population", c.ga.population);
  rd.integer(g, "survivors", c.ga.survivors);
  rd.integer(g, "mutation_children", c.ga.mutation_children);
  rd.integer(g, "crossover_children", c.ga.crossover_children);
  rd.integer(g, "generations", c.ga.generations);
  rd.number(g, "sigma", c.ga.sigma);
  rd.number(g, "gene_rate", c.ga.gene_rate);
  rd.integer(g, "threads", c.ga.threads);
  rd.choice(g, "objective_max", c.run.ga_max_objective, parse_objective_opt,
            "CIS_OVER_AREA, CIS, MINUS_CIS_OVER_AREA");
  rd.choice(g, "objective_min", c.run.ga_min_objective, parse_objective_opt,
            "CIS_OVER_AREA, CIS, MINUS_CIS_OVER_AREA");
  rd.integer(g, "checkpoint_every", c.run.checkpoint_every);
  rd.finish(g);

  auto o = rd.section("oct");
  rd.number(o, "target_time", c.oct.target_time);
  rd.number(o, "window", c.oct.window);
  rd.number(o, "dt", c.oct.dt);
  rd.number(o, "alpha", c.oct.alpha);
  rd.integer(o, "max_iterations", c.oct.max_iterations);
  rd.number(o, "stagnation", c.oct.stagnation);
  rd.integer(o, "stagnation_window", c.oct.stagnation_window);
  rd.number(o, "monotonic_tolerance", c.oct.monotonic_tolerance);
  rd.integer(o, "checkpoint_stride", c.oct.checkpoint_stride);
  rd.boolean(o, "safeguard", c.oct.safeguard);
  if (const json* band = rd.raw(o, "band")) {
    if (band->is_null()) {
      c.oct.band.reset();
    } else if (band->is_array() && band->size() == 2 && (*band)[0].is_number() && (*band)[1].is_number()) {
      c.oct.band = std::make_pair((*band)[0].get<double>(), (*band)[1].get<double>());
    } else {
      rd.error("oct.band", "expected null or [lo, hi] in cm^-1");
    }
  }
  auto og = rd.child(o, "guess");
  rd.number(og, "amplitude", c.oct.guess.amplitude);
  rd.number(og, "center", c.oct.guess.center);
  rd.number(og, "fwhm", c.oct.guess.fwhm);
  rd.number(og, "carrier", c.oct.guess.carrier);
  rd.finish(og);
  rd.finish(o);

  auto r = rd.section("run");
  rd.choice(r, "mode", c.run.mode, parse_mode, "eigen, propagate, ga-max, ga-min, oct-max, oct-min, spectrum");
  rd.number(r, "target_time", c.run.target_time);
  rd.string(r, "out", c.run.out);
  if (const json* s = rd.raw(r, "seed")) {
    if (s->is_null()) {
      c.run.seed.reset();
    } else if (s->is_number_unsigned()) {
      c.run.seed = s->get<std::uint64_t>();
    } else {
      rd.error("run.seed", "expected a non-negative integer or null");
    }
  }
  rd.boolean(r, "cache", c.run.cache);
  rd.number(r, "area_dt", c.run.area_dt);
  auto sp = rd.child(r, "spectrogram");
  rd.number(sp, "window_fwhm", c.run.spectrogram.window_fwhm);
  rd.number(sp, "time_step", c.run.spectrogram.time_step);
  rd.number(sp, "freq_min", c.run.spectrogram.freq_min);
  rd.number(sp, "freq_max", c.run.spectrogram.freq_max);
  rd.finish(sp);
  rd.finish(r);

  if (rd.errors().empty()) {
    rd.check("model", [&] { c.model.validate(); });
    rd.check("bath", [&] { c.bath.validate(); });
    rd.check("field", [&] { c.field.validate(); });
    rd.check("propagator", [&] { c.propagator.validate(); });
    rd.check("ga", [&] { c.ga.validate(); });
    rd.check("oct", [&] { c.oct.validate(); });
    if (!(c.run.target_time > 0)) rd.error("run.target_time", "must be positive");
    if (!(c.run.area_dt > 0)) rd.error("run.area_dt", "must be positive");
    if (c.run.checkpoint_every < 1) rd.error("run.checkpoint_every", "must be at least 1");
    if (c.run.out.empty()) rd.error("run.out", "must not be empty");
    const auto& s = c.run.spectrogram;
    if (!(s.window_fwhm > 0) || !(s.time_step > 0) || !(s.freq_max > s.freq_min)) {
      rd.error("run.spectrogram", "needs window_fwhm > 0, time_step > 0 and freq_max > freq_min");
    }
    if (!(c.oct.guess.carrier > 0)) {
      rd.error("oct.guess.carrier", "must be positive");
    }
  }
  if (!rd.errors().empty()) throw ConfigError(rd.errors());
  return c;
}

json parse_config_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t at = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(at), '\n');
    const std::size_t nl = text.rfind('\n', at == 0 ? 0 : at - 1);
    const std::size_t col = at - (nl == std::string::npos ? 0 : nl + 1) + 1;
    std::ostringstream os;
    os << origin << ":" << line << ":" << col << ": JSON syntax error";
    throw ConfigError({os.str()});
  }
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError({"override '" + assignment + "': expected key=value"});
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError({"override '" + assignment + "': empty key component"});
    if (!node->is_object()) throw ConfigError({"override '" + key + "': '" + part + "' is not inside an object"});
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

void resolve_phases(RunConfig& cfg, std::uint64_t seed) {
  const std::size_t n = cfg.field.frequencies.size();
  if (cfg.phase_init == PhaseInit::Zero) cfg.field.phases.assign(n, 0.0);
  if (cfg.phase_init != PhaseInit::Random) return;
  std::mt19937_64 rng = genome_rng(seed, -1, 0);
  std::uniform_real_distribution<double> u(0.0, 2.0 * units::kPi);
  std::vector<double> th(n);
  for (auto& x : th) x = u(rng);
  cfg.field.set_phases(th);
}

std::string config_hash(const json& resolved) { return hex64(fnv1a64(resolved.dump())); }

}  // namespace isomctl
