// multifunc: evolve, evaluate, cross-evaluate and analyse multifunctional
// CTRNN agents.

#include <cstdlib>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "multifunc/commands.hpp"

namespace mf = multifunc;
namespace fs = std::filesystem;

namespace {

mf::ExperimentConfig load_or_default(const std::string& path) {
  return path.empty() ? mf::config_from_json(mf::json::object()) : mf::load_config(path);
}

std::vector<mf::Task> parse_tasks(const std::string& s) {
  if (s == "both") return {mf::Task::Categorization, mf::Task::PoleBalance};
  return {mf::parse_task(s)};
}

mf::SensorVector parse_inputs(const std::string& s) {
  mf::SensorVector v{};
  if (s.empty()) return v;
  std::stringstream ss(s);
  std::string item;
  std::size_t k = 0;
  while (std::getline(ss, item, ',')) {
    if (k >= v.size()) throw std::invalid_argument("--inputs takes exactly 7 values");
    v[k++] = std::stod(item);
  }
  if (k != v.size()) throw std::invalid_argument("--inputs takes exactly 7 values");
  return v;
}

void check_n_inter(const mf::GenomeFile& g, const mf::ExperimentConfig& cfg, bool config_given) {
  if (config_given && g.n_inter != cfg.evo.n_inter)
    throw mf::ConfigError("genome has N=" + std::to_string(g.n_inter) + " interneurons but the config says N=" +
                          std::to_string(cfg.evo.n_inter));
}

fs::path sidecar_of(const fs::path& csv) {
  fs::path p = csv;
  p.replace_extension(".json");
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evolve and analyse multifunctional CTRNN agents"};
  app.require_subcommand(1);
  std::string config_path;
  unsigned threads = 0;
  app.add_option("-c,--config", config_path, "experiment config (JSON)");
  app.add_option("-t,--threads", threads, "worker threads (default: $" + std::string(mf::kThreadsEnvVar) + " or all cores)");

  // evolve
  auto* evo = app.add_subcommand("evolve", "run the genetic algorithm");
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> runs, generations;
  std::string evo_out;
  std::optional<std::string> paradigm;
  mf::cmd::EvolveOptions evo_opt;
  evo->add_option("--seed", seed, "master seed");
  evo->add_option("--runs", runs, "number of independent runs");
  evo->add_option("--generations", generations, "generations per run");
  evo->add_option("--paradigm", paradigm, "categorization|pole|both|pole_first|cat_first");
  evo->add_option("-o,--out", evo_out, "output directory (default: config output_dir)");
  evo->add_option("--snapshot-every", evo_opt.snapshot_every, "write a best-genome snapshot every K generations");
  evo->add_flag("-v,--verbose", evo_opt.verbose, "print per-generation progress");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "run trials for a genome and record trajectories");
  std::string genome_path, task_name = "both", ev_out;
  mf::cmd::TrialOverrides ov;
  double angvel = 0.0;
  ev->add_option("genome", genome_path, "genome JSON")->required();
  ev->add_option("--task", task_name, "categorization|pole|both");
  ev->add_option("-o,--out", ev_out, "directory for trajectory CSVs and sidecars");
  ev->add_option("--offsets", ov.offsets, "object offsets to use instead of the default grid");
  ev->add_option("--pole-angles", ov.pole_angles_deg, "initial pole angles in degrees");
  auto* angvel_opt = ev->add_option("--pole-angvel", angvel, "initial pole angular velocity (radians per time unit)");

  // cross-eval
  auto* cx = app.add_subcommand("cross-eval", "evaluate genomes on the task they were and were not trained on");
  std::string cx_genome, cx_dir, cx_out, trained_name = "pole";
  std::optional<std::size_t> n_random;
  std::uint64_t cx_seed = 1;
  cx->add_option("--genome", cx_genome, "single genome JSON");
  cx->add_option("--runs-dir", cx_dir, "directory searched for best_genome.json files");
  cx->add_option("--trained", trained_name, "task the genomes were trained on (categorization|pole)");
  cx->add_option("--random", n_random, "number of random genotypes for the baseline (default: config random_agents)");
  cx->add_option("--seed", cx_seed, "seed for the random baseline");
  cx->add_option("-o,--out", cx_out, "CSV output file");

  // analyze
  auto* an = app.add_subcommand("analyze", "attractor, basin and transient analysis");
  std::string an_genome, mode = "attractors", traj_dir, traj_a, traj_b, an_out = "analysis", inputs;
  an->add_option("genome", an_genome, "genome JSON")->required();
  an->add_option("--mode", mode, "attractors|basins|transients")
      ->check(CLI::IsMember({"attractors", "basins", "transients"}));
  an->add_option("--trajectories", traj_dir, "directory written by `evaluate`");
  an->add_option("--traj-a", traj_a, "first trajectory CSV (transients)");
  an->add_option("--traj-b", traj_b, "second trajectory CSV (transients)");
  an->add_option("--inputs", inputs, "clamped ray inputs for basins, comma separated");
  an->add_option("-o,--out", an_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    mf::ExperimentConfig cfg = load_or_default(config_path);
    if (threads) cfg.evo.threads = threads;
    std::ostream& log = std::cout;

    if (*evo) {
      if (seed) cfg.evo.seed = *seed;
      if (runs) cfg.n_runs = *runs;
      if (generations) cfg.evo.generations = *generations;
      if (paradigm) cfg.evo.paradigm = mf::parse_paradigm(*paradigm);
      cfg.evo.validate();
      return mf::cmd::evolve(cfg, evo_out.empty() ? fs::path(cfg.output_dir) : fs::path(evo_out), evo_opt, log);
    }

    if (*ev) {
      const auto g = mf::load_genome(genome_path);
      check_n_inter(g, cfg, !config_path.empty());
      if (angvel_opt->count()) ov.pole_angvel = angvel;
      std::optional<fs::path> out;
      if (!ev_out.empty()) out = ev_out;
      mf::cmd::evaluate(g, cfg, parse_tasks(task_name), ov, out, log);
      return 0;
    }

    if (*cx) {
      const mf::Task trained = mf::parse_task(trained_name);
      std::vector<mf::cmd::CrossEvalRow> rows;
      if (!cx_genome.empty()) {
        const auto g = mf::load_genome(cx_genome);
        check_n_inter(g, cfg, !config_path.empty());
        rows.push_back(mf::cmd::cross_eval_genome(g, trained, cfg.env, cx_genome));
      }
      if (!cx_dir.empty())
        for (const auto& p : mf::cmd::find_best_genomes(cx_dir))
          rows.push_back(mf::cmd::cross_eval_genome(mf::load_genome(p), trained, cfg.env, p.string()));
      const std::size_t nr = n_random.value_or(cx_genome.empty() && cx_dir.empty() ? cfg.random_agents : 0);
      auto base = mf::cmd::random_baseline(nr, cfg.evo.n_inter, cx_seed, trained, cfg.env, cfg.evo.threads);
      rows.insert(rows.end(), base.begin(), base.end());
      const std::string csv = mf::cmd::cross_eval_csv(rows);
      if (cx_out.empty()) log << csv;
      else mf::write_text(cx_out, csv);
      if (nr > 0) {
        double cat = 0.0, pole = 0.0;
        for (const auto& r : base) cat += r.categorization(), pole += r.pole();
        std::cerr << "random baseline (" << nr << "): categorization " << cat / nr << ", pole " << pole / nr << "\n";
      }
      return 0;
    }

    if (*an) {
      const auto g = mf::load_genome(an_genome);
      check_n_inter(g, cfg, !config_path.empty());
      if (mode == "attractors") {
        const auto trials = traj_dir.empty() ? std::vector<mf::TrialResult>{} : mf::cmd::load_trajectories(traj_dir);
        mf::cmd::analyze_attractors(g, cfg, trials, an_out, log);
      } else if (mode == "basins") {
        mf::cmd::analyze_basins(g, cfg, parse_inputs(inputs), an_out, log);
      } else {
        if (traj_a.empty() || traj_b.empty()) throw std::invalid_argument("transients needs --traj-a and --traj-b");
        const auto a = mf::load_trajectory(traj_a, sidecar_of(traj_a));
        const auto b = mf::load_trajectory(traj_b, sidecar_of(traj_b));
        mf::cmd::analyze_transients(g, cfg, a, b, an_out, log);
      }
      return 0;
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
