#pragma once

// Elitist evolutionary search over the spectral phases.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace isomctl {

class GAError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct GAConfig {
  int population = 60;
  int survivors = 10;
  int mutation_children = 4;
  int crossover_children = 1;
  int generations = 64;
  double sigma = 0.3;       // rad, wrapped Gaussian
  double gene_rate = 0.1;   // per-gene mutation probability
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const;
};

using Genome = std::vector<double>;
using Evaluator = std::function<double(const Genome&)>;

struct Generation {
  int index = 0;
  std::vector<Genome> genomes;
  std::vector<double> fitness;  // -inf marks a failed evaluation
};

struct GenerationStats {
  int generation = 0;
  double best = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
  double best_so_far = 0.0;
  int failures = 0;
};

/// Independent stream for (seed, generation, slot).
std::mt19937_64 genome_rng(std::uint64_t seed, int generation, int slot);

Generation init_population(const GAConfig& cfg, int n_genes);

/// Fills fitness for every genome whose entry is NaN; deterministic in index order.
void evaluate(Generation& gen, const Evaluator& eval, int threads);

/// Survivor indices: highest fitness first, ties by lower index.
std::vector<int> select_survivors(const Generation& gen, int count);

/// Next generation: survivors (fitness carried), then per survivor its mutants and crossover children.
Generation evolve(const Generation& gen, const GAConfig& cfg, const Evaluator& eval);

GenerationStats summarize(const Generation& gen, double best_so_far);

struct GAReport {
  std::vector<GenerationStats> history;
  Generation last;
  Genome best;
  double best_fitness = 0.0;
};

struct GAHooks {
  std::function<void(const GAReport&)> on_generation;  // after each generation is evaluated
};

/// Runs cfg.generations evolution steps after the initial population (or from a resumed one).
GAReport run_ga(const GAConfig& cfg, int n_genes, const Evaluator& eval, const GAHooks& hooks = {},
                std::optional<GAReport> resume = std::nullopt);

void save_checkpoint(const std::filesystem::path& path, const GAConfig& cfg, const GAReport& report);
std::optional<GAReport> load_checkpoint(const std::filesystem::path& path, const GAConfig& cfg);

void write_history_csv(const std::filesystem::path& path, const std::vector<GenerationStats>& history);

}  // namespace isomctl
