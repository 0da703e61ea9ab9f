#include <doctest.h>

#include "isomctl/ga.hpp"

#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>
#include <stdexcept>

using namespace isomctl;

namespace {

constexpr double kTwoPi = 6.283185307179586476925;

double smooth(const Genome& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) s += std::cos(g[i] - 0.1 * static_cast<double>(i));
  return s;
}

GAConfig small() {
  GAConfig c;
  c.population = 12;
  c.survivors = 2;
  c.mutation_children = 4;
  c.crossover_children = 1;
  c.generations = 6;
  c.seed = 77;
  return c;
}

}  // namespace

TEST_SUITE("ga") {

TEST_CASE("population sizing is validated") {
  GAConfig c;
  CHECK_NOTHROW(c.validate());
  c.population = 61;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("must equal population"), GAError);
  c = GAConfig{};
  c.gene_rate = 1.5;
  CHECK_THROWS_AS(c.validate(), GAError);
  c = GAConfig{};
  c.threads = 0;
  CHECK_THROWS_AS(c.validate(), GAError);
}

TEST_CASE("initial genes are uniform on [0, 2pi)") {
  GAConfig c;
  c.seed = 2024;
  const auto g = init_population(c, 128);
  REQUIRE(g.genomes.size() == 60);
  constexpr int bins = 16;
  std::vector<double> counts(bins, 0.0);
  double total = 0.0;
  for (const auto& genome : g.genomes) {
    CHECK(genome.size() == 128);
    for (double x : genome) {
      REQUIRE(x >= 0.0);
      REQUIRE(x < kTwoPi);
      counts[static_cast<int>(x / kTwoPi * bins)] += 1.0;
      total += 1.0;
    }
  }
  double chi2 = 0.0;
  for (double k : counts) chi2 += std::pow(k - total / bins, 2) / (total / bins);
  CHECK(chi2 < 37.7);  // 99.9% quantile, 15 dof
  for (double f : g.fitness) CHECK(std::isnan(f));
}

TEST_CASE("same seed gives identical runs") {
  const auto a = run_ga(small(), 32, smooth);
  const auto b = run_ga(small(), 32, smooth);
  CHECK(a.best == b.best);
  CHECK(a.best_fitness == b.best_fitness);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) CHECK(a.history[i].mean == b.history[i].mean);
  GAConfig other = small();
  other.seed = 78;
  CHECK(run_ga(other, 32, smooth).best != a.best);
}

TEST_CASE("thread count does not change the result") {
  GAConfig c = small();
  const auto a = run_ga(c, 32, smooth);
  c.threads = 3;
  const auto b = run_ga(c, 32, smooth);
  CHECK(a.best == b.best);
  CHECK(a.last.fitness == b.last.fitness);
}

TEST_CASE("constant fitness keeps the lowest indices") {
  GAConfig c;
  auto g = init_population(c, 8);
  for (auto& f : g.fitness) f = 1.0;
  const auto s = select_survivors(g, 10);
  std::vector<int> expect(10);
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(s == expect);
}

TEST_CASE("zero mutation width clones the parents") {
  GAConfig c = small();
  c.sigma = 0.0;
  c.gene_rate = 1.0;
  c.crossover_children = 0;
  c.mutation_children = 5;
  auto g = init_population(c, 16);
  evaluate(g, smooth, 1);
  const auto s = select_survivors(g, c.survivors);
  const auto next = evolve(g, c, smooth);
  for (int r = 0; r < c.survivors; ++r) {
    for (int m = 0; m < c.mutation_children; ++m) {
      CHECK(next.genomes[c.survivors + r * c.mutation_children + m] == g.genomes[s[r]]);
    }
  }
}

TEST_CASE("crossover children take each gene from one of two survivors") {
  GAConfig c = small();
  c.mutation_children = 0;
  c.crossover_children = 5;
  auto g = init_population(c, 40);
  evaluate(g, smooth, 1);
  const auto s = select_survivors(g, c.survivors);
  const auto next = evolve(g, c, smooth);
  for (int k = c.survivors; k < c.population; ++k) {
    const int r = (k - c.survivors) / 5;
    const auto& own = g.genomes[s[r]];
    const auto& mate = g.genomes[s[1 - r]];
    for (std::size_t i = 0; i < own.size(); ++i) CHECK((next.genomes[k][i] == own[i] || next.genomes[k][i] == mate[i]));
  }
}

TEST_CASE("elitism keeps the best fitness non-decreasing") {
  const auto rep = run_ga(small(), 32, smooth);
  REQUIRE(rep.history.size() == 7);
  for (std::size_t i = 1; i < rep.history.size(); ++i) {
    CHECK(rep.history[i].best >= rep.history[i - 1].best);
    CHECK(rep.history[i].best_so_far >= rep.history[i - 1].best_so_far);
  }
  CHECK(rep.best_fitness == rep.history.back().best_so_far);
  CHECK(smooth(rep.best) == rep.best_fitness);
}

TEST_CASE("failed evaluations score negative infinity") {
  GAConfig c = small();
  auto g = init_population(c, 4);
  int calls = 0;
  evaluate(
      g,
      [&](const Genome& x) {
        ++calls;
        if (calls == 3) throw std::runtime_error("boom");
        if (calls == 5) return std::numeric_limits<double>::quiet_NaN();
        return smooth(x);
      },
      1);
  CHECK(g.fitness[2] == -std::numeric_limits<double>::infinity());
  CHECK(g.fitness[4] == -std::numeric_limits<double>::infinity());
  const auto st = summarize(g, -std::numeric_limits<double>::infinity());
  CHECK(st.failures == 2);
  const auto s = select_survivors(g, c.population);
  CHECK(g.fitness[s.back()] == -std::numeric_limits<double>::infinity());
}

TEST_CASE("checkpoint round trip resumes bit-identically") {
  const auto dir = std::filesystem::temp_directory_path() / "isomctl_ga_ckpt";
  std::filesystem::create_directories(dir);
  const auto path = dir / "ga.json";
  GAConfig c = small();
  const auto full = run_ga(c, 24, smooth);

  GAConfig partial = c;
  partial.generations = 3;
  save_checkpoint(path, c, run_ga(partial, 24, smooth));
  auto loaded = load_checkpoint(path, c);
  REQUIRE(loaded);
  CHECK(loaded->last.index == 3);
  const auto resumed = run_ga(c, 24, smooth, {}, loaded);
  CHECK(resumed.best == full.best);
  CHECK(resumed.last.genomes == full.last.genomes);
  CHECK(resumed.history.size() == full.history.size());

  GAConfig other = c;
  other.seed = 5;
  CHECK_THROWS_AS(load_checkpoint(path, other), GAError);
  CHECK_FALSE(load_checkpoint(dir / "missing.json", c));
  std::filesystem::remove_all(dir);
}

TEST_CASE("history csv") {
  const auto dir = std::filesystem::temp_directory_path() / "isomctl_ga_csv";
  const auto rep = run_ga(small(), 8, smooth);
  write_history_csv(dir / "h.csv", rep.history);
  CHECK(std::filesystem::file_size(dir / "h.csv") > 0);
  std::filesystem::remove_all(dir);
}

}
