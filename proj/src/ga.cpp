#include "isomctl/ga.hpp"

#include "isomctl/field.hpp"
#include "isomctl/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <thread>

namespace isomctl {

namespace {

constexpr double kTwoPi = 6.283185307179586476925;

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double sanitize(double f) { return std::isfinite(f) ? f : -std::numeric_limits<double>::infinity(); }

}  // namespace

void GAConfig::validate() const {
  if (survivors <= 0 || population <= 0) throw GAError("ga: population and survivors must be positive");
  if (survivors * (1 + mutation_children + crossover_children) != population) {
    throw GAError("ga: survivors * (1 + mutation_children + crossover_children) must equal population (" +
                  std::to_string(survivors) + " * " + std::to_string(1 + mutation_children + crossover_children) +
                  " != " + std::to_string(population) + ")");
  }
  if (crossover_children > 0 && survivors < 2) throw GAError("ga: crossover needs at least two survivors");
  if (generations < 0) throw GAError("ga.generations: must be >= 0");
  if (!(sigma >= 0)) throw GAError("ga.sigma: must be >= 0");
  if (!(gene_rate >= 0 && gene_rate <= 1)) throw GAError("ga.gene_rate: must lie in [0, 1]");
  if (threads < 1) throw GAError("ga.threads: must be >= 1");
}

std::mt19937_64 genome_rng(std::uint64_t seed, int generation, int slot) {
  std::uint64_t x = seed;
  std::uint64_t a = splitmix64(x);
  x ^= static_cast<std::uint64_t>(generation) * 0xd1b54a32d192ed03ULL + a;
  std::uint64_t b = splitmix64(x);
  x ^= static_cast<std::uint64_t>(slot) * 0x8cb92ba72f3d8dd7ULL + b;
  std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(x)), static_cast<std::uint32_t>(splitmix64(x)),
                    static_cast<std::uint32_t>(splitmix64(x)), static_cast<std::uint32_t>(splitmix64(x))};
  return std::mt19937_64(seq);
}

Generation init_population(const GAConfig& cfg, int n_genes) {
  cfg.validate();
  Generation g;
  g.index = 0;
  g.genomes.resize(cfg.population);
  g.fitness.assign(cfg.population, std::numeric_limits<double>::quiet_NaN());
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  for (int k = 0; k < cfg.population; ++k) {
    auto rng = genome_rng(cfg.seed, 0, k);
    g.genomes[k].resize(n_genes);
    for (auto& x : g.genomes[k]) x = wrap_phase(u(rng));
  }
  return g;
}

void evaluate(Generation& gen, const Evaluator& eval, int threads) {
  std::vector<int> todo;
  for (int k = 0; k < static_cast<int>(gen.genomes.size()); ++k) {
    if (std::isnan(gen.fitness[k])) todo.push_back(k);
  }
  auto work = [&](int k) {
    try {
      gen.fitness[k] = sanitize(eval(gen.genomes[k]));
    } catch (...) {
      gen.fitness[k] = -std::numeric_limits<double>::infinity();
    }
  };
  if (threads <= 1 || todo.size() <= 1) {
    for (int k : todo) work(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const int nt = std::min<int>(threads, static_cast<int>(todo.size()));
  for (int t = 0; t < nt; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < todo.size(); i = next++) work(todo[i]);
    });
  }
  for (auto& th : pool) th.join();
}

std::vector<int> select_survivors(const Generation& gen, int count) {
  std::vector<int> order(gen.genomes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return sanitize(gen.fitness[a]) > sanitize(gen.fitness[b]);
  });
  order.resize(std::min<std::size_t>(count, order.size()));
  return order;
}

Generation evolve(const Generation& gen, const GAConfig& cfg, const Evaluator& eval) {
  cfg.validate();
  const auto surv = select_survivors(gen, cfg.survivors);
  Generation next;
  next.index = gen.index + 1;
  next.genomes.reserve(cfg.population);
  next.fitness.reserve(cfg.population);
  for (int s : surv) {
    next.genomes.push_back(gen.genomes[s]);
    next.fitness.push_back(gen.fitness[s]);
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int slot = static_cast<int>(surv.size());
  for (std::size_t r = 0; r < surv.size(); ++r) {
    const Genome& parent = gen.genomes[surv[r]];
    for (int m = 0; m < cfg.mutation_children; ++m, ++slot) {
      auto rng = genome_rng(cfg.seed, next.index, slot);
      Genome child = parent;
      for (auto& x : child) {
        if (unit(rng) < cfg.gene_rate) x = wrap_phase(x + cfg.sigma * normal(rng));
      }
      next.genomes.push_back(std::move(child));
      next.fitness.push_back(std::numeric_limits<double>::quiet_NaN());
    }
    for (int c = 0; c < cfg.crossover_children; ++c, ++slot) {
      auto rng = genome_rng(cfg.seed, next.index, slot);
      std::uniform_int_distribution<std::size_t> pick(0, surv.size() - 2);
      std::size_t other = pick(rng);
      if (other >= r) ++other;
      const Genome& mate = gen.genomes[surv[other]];
      Genome child = parent;
      for (std::size_t i = 0; i < child.size(); ++i) {
        if (unit(rng) < 0.5) child[i] = mate[i];
      }
      next.genomes.push_back(std::move(child));
      next.fitness.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }
  evaluate(next, eval, cfg.threads);
  return next;
}

GenerationStats summarize(const Generation& gen, double best_so_far) {
  GenerationStats s;
  s.generation = gen.index;
  s.best = -std::numeric_limits<double>::infinity();
  double sum = 0.0, sum2 = 0.0;
  int n = 0;
  for (double f : gen.fitness) {
    if (!std::isfinite(f)) {
      ++s.failures;
      continue;
    }
    s.best = std::max(s.best, f);
    sum += f;
    sum2 += f * f;
    ++n;
  }
  if (n > 0) {
    s.mean = sum / n;
    s.stddev = std::sqrt(std::max(0.0, sum2 / n - s.mean * s.mean));
  }
  s.best_so_far = std::max(best_so_far, s.best);
  return s;
}

GAReport run_ga(const GAConfig& cfg, int n_genes, const Evaluator& eval, const GAHooks& hooks,
                std::optional<GAReport> resume) {
  cfg.validate();
  GAReport rep;
  auto update_best = [&] {
    const auto top = select_survivors(rep.last, 1);
    if (!top.empty() && (rep.best.empty() || rep.last.fitness[top[0]] > rep.best_fitness)) {
      rep.best = rep.last.genomes[top[0]];
      rep.best_fitness = rep.last.fitness[top[0]];
    }
  };
  if (resume) {
    rep = std::move(*resume);
  } else {
    rep.last = init_population(cfg, n_genes);
    evaluate(rep.last, eval, cfg.threads);
    rep.best_fitness = -std::numeric_limits<double>::infinity();
    rep.history.push_back(summarize(rep.last, rep.best_fitness));
    update_best();
    if (hooks.on_generation) hooks.on_generation(rep);
  }
  update_best();
  while (rep.last.index < cfg.generations) {
    rep.last = evolve(rep.last, cfg, eval);
    rep.history.push_back(summarize(rep.last, rep.best_fitness));
    update_best();
    if (hooks.on_generation) hooks.on_generation(rep);
  }
  return rep;
}

namespace {

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }
double from_json_number(const nlohmann::json& j) {
  return j.is_null() ? -std::numeric_limits<double>::infinity() : j.get<double>();
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const GAConfig& cfg, const GAReport& rep) {
  nlohmann::json j;
  j["schema"] = "isomctl.ga-checkpoint/1";
  j["seed"] = cfg.seed;
  j["population"] = cfg.population;
  j["generation"] = rep.last.index;
  j["genomes"] = rep.last.genomes;
  nlohmann::json fit = nlohmann::json::array();
  for (double f : rep.last.fitness) fit.push_back(finite_or_null(f));
  j["fitness"] = fit;
  j["best"] = rep.best;
  j["best_fitness"] = finite_or_null(rep.best_fitness);
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& h : rep.history) {
    hist.push_back({{"generation", h.generation}, {"best", finite_or_null(h.best)}, {"mean", h.mean},
                    {"std", h.stddev}, {"best_so_far", finite_or_null(h.best_so_far)}, {"failures", h.failures}});
  }
  j["history"] = hist;
  const auto tmp = path.string() + ".tmp";
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  {
    std::ofstream out(tmp);
    out << j.dump(1) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

std::optional<GAReport> load_checkpoint(const std::filesystem::path& path, const GAConfig& cfg) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  const auto j = nlohmann::json::parse(in);
  if (j.value("schema", "") != "isomctl.ga-checkpoint/1") throw GAError("checkpoint schema mismatch: " + path.string());
  if (j.at("seed").get<std::uint64_t>() != cfg.seed || j.at("population").get<int>() != cfg.population) {
    throw GAError("checkpoint was written with a different seed or population");
  }
  GAReport rep;
  rep.last.index = j.at("generation").get<int>();
  rep.last.genomes = j.at("genomes").get<std::vector<Genome>>();
  for (const auto& f : j.at("fitness")) rep.last.fitness.push_back(from_json_number(f));
  rep.best = j.at("best").get<Genome>();
  rep.best_fitness = from_json_number(j.at("best_fitness"));
  for (const auto& h : j.at("history")) {
    GenerationStats s;
    s.generation = h.at("generation").get<int>();
    s.best = from_json_number(h.at("best"));
    s.mean = h.at("mean").get<double>();
    s.stddev = h.at("std").get<double>();
    s.best_so_far = from_json_number(h.at("best_so_far"));
    s.failures = h.at("failures").get<int>();
    rep.history.push_back(s);
  }
  return rep;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<GenerationStats>& history) {
  CsvWriter w(path, {"generation", "best", "mean", "std", "best_so_far", "failures"});
  for (const auto& h : history) {
    w << h.generation << h.best << h.mean << h.stddev << h.best_so_far << h.failures;
    w.endrow();
  }
}

}  // namespace isomctl
