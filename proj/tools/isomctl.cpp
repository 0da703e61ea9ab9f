// isomctl: configuration-driven frontend for eigen, propagation, GA and OCT runs.

#include "isomctl/config.hpp"
#include "isomctl/simd.hpp"
#include "isomctl/workflow.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace isomctl;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

std::string iso_time(std::chrono::system_clock::time_point tp) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// "--a.b value" and "--a.b=value" leftovers become overrides.
std::vector<std::string> extras_to_overrides(const std::vector<std::string>& extras) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& a = extras[i];
    if (a.rfind("--", 0) != 0 || a.find('.') == std::string::npos) {
      throw ConfigError({"unrecognized argument '" + a + "'"});
    }
    const std::string body = a.substr(2);
    if (body.find('=') != std::string::npos) {
      out.push_back(body);
    } else if (i + 1 < extras.size()) {
      out.push_back(body + "=" + extras[++i]);
    } else {
      throw ConfigError({"option '" + a + "' needs a value"});
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dissipative photoisomerization control toolkit"};
  std::string config_path, mode, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::vector<std::string> sets;
  bool resume = false;
  bool quiet = false;
  app.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--mode", mode,
                 "eigen | propagate | ga-max | ga-min | oct-max | oct-min | spectrum | defaults");
  app.add_option("--seed", seed, "RNG seed (generated and recorded when absent)");
  app.add_option("--threads", threads, "worker threads for fitness evaluation");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--set", sets, "override key=value (repeatable)");
  app.add_flag("--resume", resume, "continue a GA run from OUT/checkpoint.json");
  app.add_flag("-q,--quiet", quiet, "no progress output");
  app.allow_extras();
  CLI11_PARSE(app, argc, argv);

  if (mode == "defaults") {
    std::cout << default_config_json().dump(2) << "\n";
    return 0;
  }

  const auto started = std::chrono::system_clock::now();
  std::vector<std::string> overrides;
  RunConfig cfg;
  json doc;
  try {
    std::string text;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      std::stringstream ss;
      ss << in.rdbuf();
      text = ss.str();
      doc = parse_config_text(text, config_path);
    } else {
      doc = default_config_json();
    }
    if (!mode.empty()) overrides.push_back("run.mode=\"" + mode + "\"");
    if (!out_dir.empty()) overrides.push_back("run.out=" + json(out_dir).dump());
    if (seed) overrides.push_back("run.seed=" + std::to_string(*seed));
    if (threads) overrides.push_back("ga.threads=" + std::to_string(*threads));
    for (const auto& s : sets) overrides.push_back(s);
    for (const auto& s : extras_to_overrides(app.remaining())) overrides.push_back(s);
    for (const auto& o : overrides) apply_override(doc, o);
    cfg = parse_config(doc, text);
  } catch (const ConfigError& e) {
    for (const auto& d : e.diagnostics()) std::cerr << "config error: " << d << "\n";
    return kExitConfig;
  }

  const std::uint64_t run_seed = cfg.run.seed ? *cfg.run.seed : std::random_device{}() * 0x100000001ULL;
  cfg.run.seed = run_seed;
  const fs::path out = cfg.run.out;

  json resolved = to_json(cfg);
  json manifest = {{"schema", "isomctl.manifest/1"},
                   {"mode", to_string(cfg.run.mode)},
                   {"config", resolved},
                   {"config_hash", config_hash(resolved)},
                   {"overrides", overrides},
                   {"seed", run_seed},
                   {"versions", tool_versions()},
                   {"simd", simd::kernels().name},
                   {"started", iso_time(started)},
                   {"command", std::vector<std::string>(argv, argv + argc)}};
  auto finish = [&](int status, const std::string& note) {
    const auto ended = std::chrono::system_clock::now();
    manifest["finished"] = iso_time(ended);
    manifest["wall_seconds"] = std::chrono::duration<double>(ended - started).count();
    manifest["exit_status"] = status;
    if (!note.empty()) manifest["note"] = note;
    try {
      fs::create_directories(out);
      write_json(out / "manifest.json", manifest);
    } catch (const std::exception& e) {
      std::cerr << "cannot write manifest: " << e.what() << "\n";
    }
    return status;
  };

  auto log = [quiet](const std::string& line) {
    if (!quiet) std::cerr << "[isomctl] " << line << std::endl;
  };
  try {
    log(std::string("mode ") + to_string(cfg.run.mode) + ", seed " + std::to_string(run_seed) + ", output " +
        out.string());
    RunContext ctx = make_context(cfg, run_seed, out, log);
    log("basis: " + std::to_string(ctx.es.size()) + " states (" + std::to_string(ctx.es.trans.size()) + " trans, " +
        std::to_string(ctx.es.cis.size()) + " cis)");
    json summary;
    if (cfg.run.mode == Mode::GaMax || cfg.run.mode == Mode::GaMin) {
      summary = run_ga_mode(ctx, cfg.run.mode == Mode::GaMax, resume);
    } else {
      summary = run_mode(ctx);
    }
    summary["seed"] = run_seed;
    summary["config_hash"] = manifest["config_hash"];
    write_json(out / "summary.json", summary);
    return finish(0, "");
  } catch (const NumericalAbort& e) {
    std::cerr << "numerical abort: " << e.what() << "\ndiagnostics: " << e.dump().string() << "\n";
    manifest["dump"] = e.dump().string();
    return finish(kExitNumerical, e.what());
  } catch (const PropagationError& e) {
    fs::create_directories(out);
    const fs::path dump = out / "abort.json";
    write_json(dump, {{"reason", e.what()}});
    std::cerr << "numerical abort: " << e.what() << "\ndiagnostics: " << dump.string() << "\n";
    manifest["dump"] = dump.string();
    return finish(kExitNumerical, e.what());
  } catch (const ModelError& e) {
    std::cerr << "config error: model: " << e.what() << "\n";
    return finish(kExitConfig, e.what());
  } catch (const FieldError& e) {
    std::cerr << "config error: field: " << e.what() << "\n";
    return finish(kExitConfig, e.what());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return finish(1, e.what());
  }
}
