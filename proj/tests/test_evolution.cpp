#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <set>

#include "multifunc/evolution.hpp"
#include "support.hpp"

using namespace multifunc;
using Catch::Approx;

namespace {

Fitness scalar(double v) { return {v, std::nullopt, std::nullopt}; }

auto sphere = [](const Genotype& g, std::size_t) {
  double s = 0.0;
  for (double x : g.genes) s += x * x;
  return scalar(1.0 - s / static_cast<double>(g.size()));
};

EvoConfig small_config(std::uint64_t seed, std::size_t gens) {
  EvoConfig c;
  c.pop_size = 30;
  c.generations = gens;
  c.seed = seed;
  c.threads = 1;
  return c;
}

}  // namespace

TEST_CASE("product fitness") {
  CHECK(combine_fitness(Paradigm::Both, 0, 0, 1.0, 1.0) == 1.0);
  CHECK(combine_fitness(Paradigm::Both, 0, 0, 0.958, 0.954) == Approx(0.914).margin(5e-4));
  CHECK(combine_fitness(Paradigm::Both, 0, 0, 0.958, 0.954) == Approx(0.958 * 0.954).epsilon(1e-15));
  for (double x : {0.0, 0.3, 1.0}) CHECK(combine_fitness(Paradigm::Both, 7, 0, x, 0.0) == 0.0);
  CHECK_THROWS_AS(combine_fitness(Paradigm::Both, 0, 0, 0.5, std::nullopt), std::invalid_argument);
}

TEST_CASE("staged paradigms switch tasks") {
  CHECK(default_switch_generation(Paradigm::PoleFirst) == 500);
  CHECK(default_switch_generation(Paradigm::CatFirst) == 1000);

  auto need = tasks_for_generation(Paradigm::PoleFirst, 499, 500);
  CHECK((!need.categorization && need.pole));
  need = tasks_for_generation(Paradigm::PoleFirst, 500, 500);
  CHECK((need.categorization && need.pole));
  need = tasks_for_generation(Paradigm::CatFirst, 999, 1000);
  CHECK((need.categorization && !need.pole));
  need = tasks_for_generation(Paradigm::CatFirst, 1000, 1000);
  CHECK((need.categorization && need.pole));

  CHECK(combine_fitness(Paradigm::PoleFirst, 10, 500, std::nullopt, 0.4) == 0.4);
  CHECK(combine_fitness(Paradigm::PoleFirst, 600, 500, 0.5, 0.4) == 0.2);
  CHECK(combine_fitness(Paradigm::CatFirst, 10, 1000, 0.7, std::nullopt) == 0.7);

  for (auto p : {Paradigm::Categorization, Paradigm::PoleBalance, Paradigm::Both, Paradigm::PoleFirst,
                 Paradigm::CatFirst})
    CHECK(parse_paradigm(to_string(p)) == p);
  CHECK_THROWS_AS(parse_paradigm("juggling"), std::invalid_argument);
}

TEST_CASE("elite count") {
  EvoConfig c;
  CHECK(c.elite_count() == 4);
  c.pop_size = 10;
  CHECK(c.elite_count() == 1);
  c.pop_size = 30;
  CHECK(c.elite_count() == 2);
}

TEST_CASE("mutation is clamped and seeded") {
  Genotype g;
  g.genes.assign(200, 0.95);
  const auto a = mutate(g, 0.3, 42), b = mutate(g, 0.3, 42), c = mutate(g, 0.3, 43);
  CHECK(a == b);
  CHECK(!(a == c));
  for (double x : a.genes) CHECK((x >= -1.0 && x <= 1.0));
  CHECK(mutate(g, 0.0, 1) == g);

  // Sample variance of the unclamped noise.
  Genotype z;
  z.genes.assign(20000, 0.0);
  const auto m = mutate(z, 0.01, 5);
  double s2 = 0.0;
  for (double x : m.genes) s2 += x * x;
  CHECK(s2 / 20000.0 == Approx(0.01).epsilon(0.05));
}

TEST_CASE("constant fitness keeps the best constant") {
  auto constant = [](const Genotype&, std::size_t) { return scalar(0.37); };
  const auto run = evolve(small_config(1, 20), constant);
  for (const auto& g : run.generations) CHECK(g.combined.best == 0.37);
}

TEST_CASE("sphere surrogate is climbed") {
  EvoConfig c;
  c.generations = 200;
  c.seed = 2024;
  c.n_inter = 2;
  const auto run = evolve(c, sphere);
  CHECK(run.last().combined.best >= run.generations.front().combined.best + 0.05);

  // With small steps the same loop gets close to the optimum.
  c.mutation_variance = 0.001;
  const auto fine = evolve(c, sphere);
  CHECK(fine.last().combined.best >= 0.99);
}

TEST_CASE("GA invariants: monotone best, closure, elite preservation") {
  EvoConfig c = small_config(9, 40);
  auto eval = [&](const Genotype& g, std::size_t) { return sphere(g, 0); };
  auto record = evolve(c, eval);
  for (std::size_t i = 1; i < record.generations.size(); ++i)
    CHECK(record.generations[i].combined.best >= record.generations[i - 1].combined.best);

  // Drive the steps by hand to inspect whole populations.
  auto pop = initial_population(c);
  for (std::size_t gen = 0; gen < 30; ++gen) {
    std::vector<Fitness> fit;
    for (const auto& g : pop) {
      REQUIRE(g.size() == genome_dimension(c.n_inter));
      for (double x : g.genes) REQUIRE((x >= -1.0 && x <= 1.0));
      fit.push_back(sphere(g, gen));
    }
    const auto ranking = rank_population(fit);
    const auto next = next_generation(c, pop, ranking, gen);
    for (std::size_t e = 0; e < c.elite_count(); ++e) REQUIRE(next[e] == pop[ranking[e]]);
    pop = next;
  }
}

TEST_CASE("ranking is stable on ties") {
  std::vector<Fitness> f{scalar(0.5), scalar(0.9), scalar(0.5), scalar(0.9), scalar(0.1)};
  CHECK(rank_population(f) == std::vector<std::size_t>{1, 3, 0, 2, 4});
}

TEST_CASE("seed determinism and thread independence") {
  auto eval = [](const Genotype& g, std::size_t gen) { return sphere(g, gen); };
  EvoConfig c = small_config(77, 15);
  const auto a = evolve(c, eval);
  const auto b = evolve(c, eval);
  c.threads = 4;
  const auto d = evolve(c, eval);
  REQUIRE(a.generations.size() == b.generations.size());
  for (std::size_t i = 0; i < a.generations.size(); ++i) {
    CHECK(a.generations[i].best_genome == b.generations[i].best_genome);
    CHECK(a.generations[i].best_genome == d.generations[i].best_genome);
    CHECK(a.generations[i].combined.mean == d.generations[i].combined.mean);
  }
  c.seed = 78;
  const auto e = evolve(c, eval);
  CHECK(!(e.generations[0].best_genome == a.generations[0].best_genome));
}

TEST_CASE("observer can stop a run") {
  std::size_t seen = 0;
  const auto run = evolve(small_config(3, 50), sphere, [&](const GenerationStats&) { return ++seen < 5; });
  CHECK(run.generations.size() == 5);
}

TEST_CASE("derived seeds are distinct") {
  std::set<std::uint64_t> seeds;
  for (std::uint64_t i = 0; i < 1000; ++i) seeds.insert(derive_seed(123, 0xBA7C4, i));
  CHECK(seeds.size() == 1000);
  CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
}

TEST_CASE("cross evaluation is order independent") {
  EnvConfig env;
  std::mt19937_64 rng(10);
  AgentParams p = testsupport::random_params(2, rng);
  std::fill(p.w_inter_to_motor.begin(), p.w_inter_to_motor.end(), 0.0);
  const auto [pole_a, cat_a] = cross_evaluate(p, Task::PoleBalance, env);
  const auto [cat_b, pole_b] = cross_evaluate(p, Task::Categorization, env);
  CHECK(pole_a == pole_b);
  CHECK(cat_a == cat_b);
  CHECK(cat_a == Approx(0.5));
}

TEST_CASE("agent evaluator follows the paradigm") {
  EvoConfig c;
  c.paradigm = Paradigm::PoleFirst;
  c.switch_generation = 3;
  EnvConfig env;
  const auto eval = make_agent_evaluator(c, env);
  std::mt19937_64 rng(2);
  const Genotype g = testsupport::random_genotype(2, rng);
  const Fitness early = eval(g, 0), late = eval(g, 3);
  CHECK(!early.categorization);
  REQUIRE(early.pole);
  CHECK(early.combined == *early.pole);
  REQUIRE(late.categorization);
  CHECK(late.combined == *late.categorization * *late.pole);
  CHECK(*late.pole == *early.pole);
}

TEST_CASE("config validation") {
  EvoConfig c;
  c.pop_size = 0;
  CHECK_THROWS(c.validate());
  c = EvoConfig{};
  c.elite_fraction = 0.0;
  CHECK_THROWS(c.validate());
  c = EvoConfig{};
  c.n_inter = 0;
  CHECK_THROWS(c.validate());
}
