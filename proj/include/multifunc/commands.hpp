#pragma once

// Experiment driver commands behind the `multifunc` CLI. Every command writes
// into its own output directory and stamps the config hash and seed into
// what it writes.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "multifunc/config.hpp"
#include "multifunc/dynamics.hpp"
#include "multifunc/embodiment.hpp"
#include "multifunc/evolution.hpp"
#include "multifunc/io.hpp"

namespace multifunc::cmd {

namespace fs = std::filesystem;

/// Seed of run `i` in a batch.
inline std::uint64_t run_seed(std::uint64_t master, std::size_t i) { return derive_seed(master, 0xBA7C4, i); }

inline std::string run_dir_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "run_%03zu", i);
  return buf;
}

inline GenomeFile genome_snapshot(const GenerationStats& g, const ExperimentConfig& cfg, const RunRecord& run) {
  GenomeFile f;
  f.n_inter = cfg.evo.n_inter;
  f.genotype = g.best_genome;
  f.meta = {{"generation", g.generation},
            {"paradigm", to_string(cfg.evo.paradigm)},
            {"fitness",
             {{"combined", g.best_fitness.combined},
              {"categorization", optional_json(g.best_fitness.categorization)},
              {"pole", optional_json(g.best_fitness.pole)}}},
            {"seed", run.seed},
            {"config_hash", run.config_hash}};
  return f;
}

struct EvolveOptions {
  std::size_t snapshot_every = 100;
  bool verbose = false;
};

/// Runs one GA run into `dir`: config.json, run_log.jsonl, best_genome.json,
/// snapshots/ and summary.json.
inline RunRecord evolve_run(const ExperimentConfig& cfg, const fs::path& dir, const EvolveOptions& opt = {},
                            std::ostream* log = nullptr) {
  fs::create_directories(dir / "snapshots");
  const std::string hash = config_hash(cfg);
  write_text(dir / "config.json", to_json(cfg).dump(2) + "\n");

  const std::size_t switch_gen =
      cfg.evo.switch_generation > 0 ? cfg.evo.switch_generation : default_switch_generation(cfg.evo.paradigm);
  RunRecord partial;
  partial.seed = cfg.evo.seed;
  partial.config_hash = hash;
  auto observer = [&](const GenerationStats& g) {
    const bool last = g.generation + 1 == cfg.evo.generations;
    const bool before_switch = switch_gen > 0 && g.generation + 1 == switch_gen;
    if ((opt.snapshot_every > 0 && g.generation % opt.snapshot_every == 0) || before_switch || last) {
      char name[48];
      std::snprintf(name, sizeof name, "best_gen_%05zu.json", g.generation);
      save_genome(dir / "snapshots" / name, genome_snapshot(g, cfg, partial));
    }
    if (log && opt.verbose)
      *log << "  gen " << g.generation << " best " << g.combined.best << " mean " << g.combined.mean << "\n";
    return true;
  };
  RunRecord run = evolve(cfg.evo, make_agent_evaluator(cfg.evo, cfg.env), observer);
  run.config_hash = hash;

  write_text(dir / "run_log.jsonl", run_log_jsonl(run));
  const auto& last = run.last();
  save_genome(dir / "best_genome.json", genome_snapshot(last, cfg, run));
  json summary{{"seed", run.seed},
               {"config_hash", hash},
               {"generations", run.generations.size()},
               {"best_fitness", last.best_fitness.combined},
               {"best_categorization", optional_json(last.best_fitness.categorization)},
               {"best_pole", optional_json(last.best_fitness.pole)},
               {"paradigm", to_string(cfg.evo.paradigm)}};
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  return run;
}

/// `evolve`: n_runs runs with seeds derived from the master seed.
inline int evolve(const ExperimentConfig& base, const fs::path& out, const EvolveOptions& opt, std::ostream& log) {
  json batch = json::array();
  for (std::size_t i = 0; i < base.n_runs; ++i) {
    ExperimentConfig cfg = base;
    cfg.n_runs = 1;
    cfg.evo.seed = run_seed(base.evo.seed, i);
    const fs::path dir = out / run_dir_name(i);
    log << "run " << i << " seed " << cfg.evo.seed << " -> " << dir.string() << "\n";
    const RunRecord run = evolve_run(cfg, dir, opt, &log);
    const auto& last = run.last();
    log << "  best fitness " << last.best_fitness.combined << "\n";
    batch.push_back({{"run", i},
                     {"dir", run_dir_name(i)},
                     {"seed", cfg.evo.seed},
                     {"config_hash", run.config_hash},
                     {"best_fitness", last.best_fitness.combined}});
  }
  write_text(out / "batch_summary.json",
             json{{"master_seed", base.evo.seed}, {"config_hash", config_hash(base)}, {"runs", batch}}.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------

struct TrialOverrides {
  std::vector<double> offsets;          // categorization offsets, used for both kinds
  std::vector<double> pole_angles_deg;  // initial pole angles
  std::optional<double> pole_angvel;    // initial angular velocity, radians per time unit
};

inline std::vector<TrialSpec> trials_for(Task task, const EnvConfig& env, const TrialOverrides& ov) {
  if (task == Task::Categorization) {
    if (ov.offsets.empty()) return categorization_trials(env);
    std::vector<TrialSpec> t;
    for (auto kind : {TrialTask::Catch, TrialTask::Avoid})
      for (double o : ov.offsets) t.push_back({kind, o, 0.0, 0.0});
    return t;
  }
  if (ov.pole_angles_deg.empty() && !ov.pole_angvel) return pole_trials(env);
  std::vector<TrialSpec> t;
  std::vector<double> angles = ov.pole_angles_deg;
  if (angles.empty())
    for (const auto& s : pole_trials(env)) angles.push_back(s.pole_angle / kDegree);
  const double w = ov.pole_angvel.value_or(env.pole_initial_angvel);
  for (double a : angles)
    for (double sw : {-1.0, 1.0}) t.push_back({TrialTask::PoleBalance, 0.0, a * kDegree, sw * w});
  return t;
}

struct TaskReport {
  Task task;
  std::vector<TrialResult> results;
  double fitness = 0.0;
};

/// `evaluate`: runs the trial grid for each task, writes per-trial CSV and
/// sidecar plus report.json, prints per-trial and aggregate scores.
inline std::vector<TaskReport> evaluate(const GenomeFile& genome, const ExperimentConfig& cfg,
                                        const std::vector<Task>& tasks, const TrialOverrides& ov,
                                        const std::optional<fs::path>& out, std::ostream& log) {
  const AgentParams params = decode_genotype(genome.genotype, genome.n_inter);
  const std::string hash = config_hash(cfg);
  std::vector<TaskReport> reports;
  json report = json::array();
  for (Task task : tasks) {
    TaskReport rep{task, {}, 0.0};
    const auto specs = trials_for(task, cfg.env, ov);
    Network net(params);
    json rows = json::array();
    for (std::size_t i = 0; i < specs.size(); ++i) {
      TrialResult r = run_trial(net, specs[i], cfg.env, out.has_value());
      char name[64];
      std::snprintf(name, sizeof name, "%s_%02zu", to_string(r.spec.task).c_str(), i);
      log << to_string(task) << " trial " << i << " " << to_string(r.spec.task) << " score " << r.score << " ("
          << to_string(r.termination) << ")\n";
      if (out) {
        write_text(*out / (std::string(name) + ".csv"), trajectory_csv(r, genome.n_inter));
        write_text(*out / (std::string(name) + ".json"),
                   trial_sidecar(r, genome.n_inter, hash, cfg.evo.seed).dump(2) + "\n");
      }
      rows.push_back({{"trial", name}, {"spec", trial_spec_json(r.spec)}, {"score", r.score},
                      {"termination", to_string(r.termination)}});
      r.trajectory.shrink_to_fit();
      rep.results.push_back(std::move(r));
    }
    rep.fitness = mean_score(rep.results);
    log << to_string(task) << " fitness " << rep.fitness << "\n";
    report.push_back({{"task", to_string(task)}, {"fitness", rep.fitness}, {"trials", rows}});
    reports.push_back(std::move(rep));
  }
  if (out)
    write_text(*out / "report.json",
               json{{"config_hash", hash}, {"seed", cfg.evo.seed}, {"genome_meta", genome.meta}, {"tasks", report}}
                       .dump(2) +
                   "\n");
  return reports;
}

// ---------------------------------------------------------------------------

struct CrossEvalRow {
  std::string source;
  Task trained;
  double trained_fitness = 0.0;
  double other_fitness = 0.0;

  double categorization() const { return trained == Task::Categorization ? trained_fitness : other_fitness; }
  double pole() const { return trained == Task::PoleBalance ? trained_fitness : other_fitness; }
};

inline CrossEvalRow cross_eval_genome(const GenomeFile& g, Task trained, const EnvConfig& env, std::string source) {
  const auto [a, b] = cross_evaluate(decode_genotype(g.genotype, g.n_inter), trained, env);
  return {std::move(source), trained, a, b};
}

/// All best_genome.json files under `dir`, in path order.
inline std::vector<fs::path> find_best_genomes(const fs::path& dir) {
  std::vector<fs::path> found;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() == "best_genome.json") found.push_back(e.path());
  std::sort(found.begin(), found.end());
  return found;
}

/// Random-genotype baseline rows; genotype i is drawn from derive_seed(seed, i).
inline std::vector<CrossEvalRow> random_baseline(std::size_t n, std::size_t n_inter, std::uint64_t seed,
                                                 Task trained, const EnvConfig& env, unsigned threads) {
  std::vector<CrossEvalRow> rows(n);
  parallel_for(n, resolve_threads(threads), [&](std::size_t i) {
    std::mt19937_64 rng(derive_seed(seed, 0x4A4D, i));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    GenomeFile g;
    g.n_inter = n_inter;
    g.genotype.genes.resize(genome_dimension(n_inter));
    for (auto& x : g.genotype.genes) x = u(rng);
    rows[i] = cross_eval_genome(g, trained, env, "random_" + std::to_string(i));
  });
  return rows;
}

inline std::string cross_eval_csv(const std::vector<CrossEvalRow>& rows) {
  std::string out = "source,trained_task,trained_fitness,other_fitness,categorization,pole\n";
  for (const auto& r : rows)
    out += r.source + "," + to_string(r.trained) + "," + format_double(r.trained_fitness) + "," +
           format_double(r.other_fitness) + "," + format_double(r.categorization()) + "," + format_double(r.pole()) +
           "\n";
  return out;
}

// ---------------------------------------------------------------------------

/// Trajectories written by `evaluate` in `dir` (CSV + sidecar pairs).
inline std::vector<TrialResult> load_trajectories(const fs::path& dir) {
  std::vector<fs::path> csvs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") csvs.push_back(e.path());
  std::sort(csvs.begin(), csvs.end());
  std::vector<TrialResult> out;
  for (const auto& c : csvs) {
    fs::path side = c;
    side.replace_extension(".json");
    if (fs::exists(side)) out.push_back(load_trajectory(c, side));
  }
  return out;
}

/// `analyze --mode attractors`: one attractor set per behavior present in
/// the trajectories (all three from the static grid when none are given).
inline std::vector<AttractorSet> analyze_attractors(const GenomeFile& genome, const ExperimentConfig& cfg,
                                                    const std::vector<TrialResult>& trials, const fs::path& out,
                                                    std::ostream& log) {
  const AgentParams p = decode_genotype(genome.genotype, genome.n_inter);
  std::vector<Behavior> behaviors;
  for (auto b : {Behavior::CircleCatch, Behavior::LineAvoid, Behavior::PoleBalance}) {
    const bool present = std::any_of(trials.begin(), trials.end(),
                                     [b](const TrialResult& t) { return behavior_of(t.spec.task) == b; });
    if (present || trials.empty()) behaviors.push_back(b);
  }
  std::vector<AttractorSet> sets;
  const std::string hash = config_hash(cfg);
  for (auto b : behaviors) {
    AttractorSet s = build_attractor_set(p, b, trials, cfg.env, cfg.analysis);
    log << to_string(b) << ": " << s.attractors.size() << " attractors (" << s.count(AttractorKind::FixedPoint)
        << " fixed points, " << s.count(AttractorKind::LimitCycle) << " limit cycles) over " << s.conditions
        << " input conditions";
    if (s.non_converged) log << "; warning: " << s.non_converged << " settle runs did not converge";
    log << "\n";
    json j = attractor_set_json(s);
    j["config_hash"] = hash;
    write_text(out / ("attractors_" + to_string(b) + ".json"), j.dump(2) + "\n");
    sets.push_back(std::move(s));
  }
  json comps = json::array();
  for (std::size_t i = 0; i < sets.size(); ++i)
    for (std::size_t j = i + 1; j < sets.size(); ++j) {
      const auto c = compare_attractor_sets(sets[i], sets[j], cfg.analysis.eps_loc);
      log << to_string(sets[i].behavior) << " vs " << to_string(sets[j].behavior) << ": " << c.shared.size()
          << " shared, " << c.only_a.size() << " / " << c.only_b.size() << " unique\n";
      comps.push_back(comparison_json(sets[i], sets[j], c));
    }
  write_text(out / "comparisons.json", json{{"config_hash", hash}, {"comparisons", comps}}.dump(2) + "\n");
  write_text(out / "overlap.csv", attractor_overlap_csv(sets, cfg.analysis.eps_loc));
  return sets;
}

/// `analyze --mode basins`: census over the configured state grid for one
/// clamped input.
inline BasinCensus analyze_basins(const GenomeFile& genome, const ExperimentConfig& cfg, const SensorVector& inputs,
                                  const fs::path& out, std::ostream& log) {
  const AgentParams p = decode_genotype(genome.genotype, genome.n_inter);
  const auto grid = state_grid(p.n_inter, cfg.analysis.grid_points, cfg.analysis.grid_lo, cfg.analysis.grid_hi);
  InputCondition cond{Behavior::CircleCatch, inputs, "clamped"};
  BasinCensus c = basin_census(p, cond, grid, {}, cfg.analysis.settle, cfg.analysis.eps_loc);
  for (std::size_t k = 0; k < c.attractors.size(); ++k)
    log << "attractor " << k << " (" << to_string(c.attractors[k].kind) << "): fraction " << c.fractions[k] << "\n";
  if (c.non_converged) log << "warning: " << c.non_converged << " grid points did not converge\n";
  json j = basin_census_json(c);
  j["inputs"] = inputs;
  j["config_hash"] = config_hash(cfg);
  write_text(out / "basins.json", j.dump(2) + "\n");
  return c;
}

/// `analyze --mode transients`: matches interneuron output series of two
/// recorded trials and summarises the sensory context of the best match.
inline std::vector<TransientMatch> analyze_transients(const GenomeFile& genome, const ExperimentConfig& cfg,
                                                      const TrialResult& a, const TrialResult& b, const fs::path& out,
                                                      std::ostream& log) {
  const AgentParams p = decode_genotype(genome.genotype, genome.n_inter);
  const Series sa = inter_output_series(p, a), sb = inter_output_series(p, b);
  const auto matches = match_transients(sa, sb, cfg.transients);
  log << matches.size() << " matched transient windows\n";
  json j{{"config_hash", config_hash(cfg)}, {"matches", matches_json(matches)}};
  if (!matches.empty()) {
    const auto& m = matches.front();
    log << "longest: t_a=" << m.t_a << " t_b=" << m.t_b << " delay=" << m.delay << " length=" << m.length << "\n";
    j["context_a"] = sensory_context_json(sensory_context(a, m.t_a, m.t_a + m.length));
    j["context_b"] = sensory_context_json(sensory_context(b, m.t_b, m.t_b + m.length));
    write_text(out / "aligned_transients.csv", aligned_transients_csv(sa, sb, m, cfg.env.dt));
  }
  write_text(out / "transients.json", j.dump(2) + "\n");
  return matches;
}

}  // namespace multifunc::cmd
