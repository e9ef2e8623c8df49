#pragma once

// Mutation-only elitist genetic algorithm over genotypes in [-1,1]^D, the
// task-presentation paradigms, and cross-task evaluation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "multifunc/ctrnn.hpp"
#include "multifunc/embodiment.hpp"
#include "multifunc/parallel.hpp"

namespace multifunc {

// ---------------------------------------------------------------------------
// Seeds

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stream seed for (seed, a, b). Used for per-run, per-generation and
/// per-individual generators so results never depend on evaluation order.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ (b * 0x632be59bd9b4e019ULL + 1));
}

// ---------------------------------------------------------------------------
// Paradigms and fitness

enum class Paradigm { Categorization, PoleBalance, Both, PoleFirst, CatFirst };

inline std::string to_string(Paradigm p) {
  switch (p) {
    case Paradigm::Categorization: return "categorization";
    case Paradigm::PoleBalance: return "pole";
    case Paradigm::Both: return "both";
    case Paradigm::PoleFirst: return "pole_first";
    case Paradigm::CatFirst: return "cat_first";
  }
  return "?";
}

inline Paradigm parse_paradigm(const std::string& s) {
  if (s == "categorization" || s == "cat") return Paradigm::Categorization;
  if (s == "pole" || s == "pole_balance") return Paradigm::PoleBalance;
  if (s == "both") return Paradigm::Both;
  if (s == "pole_first") return Paradigm::PoleFirst;
  if (s == "cat_first") return Paradigm::CatFirst;
  throw std::invalid_argument("unknown paradigm '" + s + "'");
}

/// Generation at which the staged paradigms switch to the product fitness.
inline std::size_t default_switch_generation(Paradigm p) {
  switch (p) {
    case Paradigm::PoleFirst: return 500;
    case Paradigm::CatFirst: return 1000;
    default: return 0;
  }
}

struct TaskNeeds {
  bool categorization = false;
  bool pole = false;
};

inline TaskNeeds tasks_for_generation(Paradigm p, std::size_t generation, std::size_t switch_generation) {
  switch (p) {
    case Paradigm::Categorization: return {true, false};
    case Paradigm::PoleBalance: return {false, true};
    case Paradigm::Both: return {true, true};
    case Paradigm::PoleFirst: return generation < switch_generation ? TaskNeeds{false, true} : TaskNeeds{true, true};
    case Paradigm::CatFirst: return generation < switch_generation ? TaskNeeds{true, false} : TaskNeeds{true, true};
  }
  return {};
}

struct Fitness {
  double combined = 0.0;
  std::optional<double> categorization;
  std::optional<double> pole;
};

/// Scalar fitness for the paradigm at `generation`; multi-task phases use the
/// product of the task fitnesses.
inline double combine_fitness(Paradigm p, std::size_t generation, std::size_t switch_generation,
                              std::optional<double> categorization, std::optional<double> pole) {
  const TaskNeeds need = tasks_for_generation(p, generation, switch_generation);
  if ((need.categorization && !categorization) || (need.pole && !pole))
    throw std::invalid_argument("combine_fitness: missing task fitness for this generation");
  if (need.categorization && need.pole) return *categorization * *pole;
  return need.categorization ? *categorization : *pole;
}

inline Fitness fitness_for_generation(const AgentParams& params, std::size_t generation, Paradigm p,
                                      std::size_t switch_generation, const EnvConfig& env) {
  const TaskNeeds need = tasks_for_generation(p, generation, switch_generation);
  Network net(params);
  Fitness f;
  if (need.categorization) f.categorization = evaluate_task(net, Task::Categorization, env);
  if (need.pole) f.pole = evaluate_task(net, Task::PoleBalance, env);
  f.combined = combine_fitness(p, generation, switch_generation, f.categorization, f.pole);
  return f;
}

/// Fitness of one genome on the task it was trained for and on the other.
inline std::pair<double, double> cross_evaluate(const AgentParams& params, Task trained, const EnvConfig& env) {
  const Task other = trained == Task::Categorization ? Task::PoleBalance : Task::Categorization;
  return {evaluate_task(params, trained, env), evaluate_task(params, other, env)};
}

// ---------------------------------------------------------------------------
// GA

struct EvoConfig {
  std::size_t pop_size = 100;
  double elite_fraction = 0.04;
  double mutation_variance = 0.3;
  std::size_t n_inter = 2;
  Paradigm paradigm = Paradigm::Both;
  std::size_t switch_generation = 0;
  std::size_t generations = 2000;
  std::uint64_t seed = 0;
  OffsetSampling trial_sampling = OffsetSampling::Grid;
  unsigned threads = 0;  // 0: resolve from environment

  std::size_t elite_count() const {
    const double raw = static_cast<double>(pop_size) * elite_fraction;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(raw - 1e-9)));
  }

  void validate() const {
    if (pop_size == 0) throw std::invalid_argument("pop_size must be positive");
    if (!(elite_fraction > 0.0 && elite_fraction <= 1.0))
      throw std::invalid_argument("elite_fraction must be in (0,1]");
    if (!(mutation_variance >= 0.0)) throw std::invalid_argument("mutation_variance must be non-negative");
    if (n_inter == 0) throw std::invalid_argument("n_inter must be positive");
    if (generations == 0) throw std::invalid_argument("generations must be positive");
  }
};

struct Summary {
  double best = 0.0;
  double mean = 0.0;
  double worst = 0.0;
};

struct GenerationStats {
  std::size_t generation = 0;
  Summary combined;
  std::optional<Summary> categorization;
  std::optional<Summary> pole;
  std::size_t best_index = 0;
  Fitness best_fitness;
  Genotype best_genome;
};

struct RunRecord {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<GenerationStats> generations;

  const GenerationStats& last() const { return generations.back(); }
};

namespace detail {

inline Summary summarize(const std::vector<double>& v) {
  Summary s;
  s.best = *std::max_element(v.begin(), v.end());
  s.worst = *std::min_element(v.begin(), v.end());
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  return s;
}

}  // namespace detail

inline std::vector<Genotype> initial_population(const EvoConfig& cfg) {
  const std::size_t d = genome_dimension(cfg.n_inter);
  std::vector<Genotype> pop(cfg.pop_size);
  for (std::size_t i = 0; i < cfg.pop_size; ++i) {
    std::mt19937_64 rng(derive_seed(cfg.seed, 0, i));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    pop[i].genes.resize(d);
    for (auto& g : pop[i].genes) g = u(rng);
  }
  return pop;
}

/// Gaussian per-gene perturbation, then clamp to [-1,1].
inline Genotype mutate(const Genotype& parent, double variance, std::uint64_t stream_seed) {
  Genotype child = parent;
  if (variance <= 0.0) return child;
  std::mt19937_64 rng(stream_seed);
  std::normal_distribution<double> noise(0.0, std::sqrt(variance));
  for (auto& g : child.genes) g = std::clamp(g + noise(rng), -1.0, 1.0);
  return child;
}

/// Ranked indices, best first; ties keep index order.
inline std::vector<std::size_t> rank_population(const std::vector<Fitness>& fit) {
  std::vector<std::size_t> order(fit.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return fit[a].combined > fit[b].combined; });
  return order;
}

/// Next generation: elites copied unchanged into the first slots, remaining
/// slots filled with mutated copies cycling through the elites in rank order.
inline std::vector<Genotype> next_generation(const EvoConfig& cfg, const std::vector<Genotype>& pop,
                                             const std::vector<std::size_t>& ranking, std::size_t generation) {
  const std::size_t elites = std::min(cfg.elite_count(), pop.size());
  std::vector<Genotype> next(pop.size());
  for (std::size_t e = 0; e < elites; ++e) next[e] = pop[ranking[e]];
  for (std::size_t i = elites; i < pop.size(); ++i) {
    const Genotype& parent = pop[ranking[(i - elites) % elites]];
    next[i] = mutate(parent, cfg.mutation_variance, derive_seed(cfg.seed, generation + 1, i));
  }
  return next;
}

/// Observer called after each generation; return false to stop the run.
using GenerationObserver = std::function<bool(const GenerationStats&)>;

/// Runs the GA. `eval(genotype, generation)` must return a Fitness and be
/// safe to call concurrently.
template <class Eval>
RunRecord evolve(const EvoConfig& cfg, Eval&& eval, const GenerationObserver& observer = {}) {
  cfg.validate();
  const unsigned threads = resolve_threads(cfg.threads);
  RunRecord record;
  record.seed = cfg.seed;
  std::vector<Genotype> pop = initial_population(cfg);
  std::vector<Fitness> fit(pop.size());

  for (std::size_t gen = 0; gen < cfg.generations; ++gen) {
    parallel_for(pop.size(), threads, [&](std::size_t i) { fit[i] = eval(pop[i], gen); });
    const auto ranking = rank_population(fit);

    GenerationStats stats;
    stats.generation = gen;
    std::vector<double> combined(fit.size());
    for (std::size_t i = 0; i < fit.size(); ++i) combined[i] = fit[i].combined;
    stats.combined = detail::summarize(combined);
    auto task_summary = [&](auto member) -> std::optional<Summary> {
      std::vector<double> v;
      for (const auto& f : fit)
        if ((f.*member)) v.push_back(*(f.*member));
      if (v.empty()) return std::nullopt;
      return detail::summarize(v);
    };
    stats.categorization = task_summary(&Fitness::categorization);
    stats.pole = task_summary(&Fitness::pole);
    stats.best_index = ranking.front();
    stats.best_fitness = fit[ranking.front()];
    stats.best_genome = pop[ranking.front()];
    record.generations.push_back(stats);

    if (observer && !observer(record.generations.back())) break;
    if (gen + 1 < cfg.generations) pop = next_generation(cfg, pop, ranking, gen);
  }
  return record;
}

/// Evaluator for the embodied agent under the configured paradigm. In random
/// sampling mode every individual of a generation sees the same offsets.
inline auto make_agent_evaluator(const EvoConfig& cfg, const EnvConfig& env) {
  const std::size_t switch_gen =
      cfg.switch_generation > 0 ? cfg.switch_generation : default_switch_generation(cfg.paradigm);
  return [cfg, env, switch_gen](const Genotype& g, std::size_t generation) {
    EnvConfig e = env;
    e.offset_sampling = cfg.trial_sampling;
    if (cfg.trial_sampling == OffsetSampling::Random) e.offset_seed = derive_seed(cfg.seed, 0xC47, generation);
    return fitness_for_generation(decode_genotype(g, cfg.n_inter), generation, cfg.paradigm, switch_gen, e);
  };
}

}  // namespace multifunc
