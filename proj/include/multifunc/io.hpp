#pragma once

// File formats: genome JSON, run-log JSONL, trajectory CSV with JSON
// sidecar, and analysis exports.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "multifunc/config.hpp"
#include "multifunc/dynamics.hpp"
#include "multifunc/embodiment.hpp"
#include "multifunc/evolution.hpp"

namespace multifunc {

inline constexpr int kGenomeFormatVersion = 1;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw FormatError("format_double: conversion failed");
  return std::string(buf, end);
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Genome files
//
//   {"version": 1, "n_inter": N, "genes": [D numbers in [-1,1]],
//    "layout": [...], "meta": {...}}
//
// "layout" lists the decode order and ranges; it is informational and not
// read back.

struct GenomeFile {
  std::size_t n_inter = 0;
  Genotype genotype;
  json meta = json::object();
};

inline json genome_to_json(const GenomeFile& g) {
  return json{{"version", kGenomeFormatVersion},
              {"n_inter", g.n_inter},
              {"genes", g.genotype.genes},
              {"layout", genome_layout()},
              {"meta", g.meta}};
}

inline GenomeFile genome_from_json(const json& j) {
  GenomeFile g;
  try {
    if (j.at("version").get<int>() != kGenomeFormatVersion)
      throw FormatError("unsupported genome version " + j.at("version").dump());
    g.n_inter = j.at("n_inter").get<std::size_t>();
    g.genotype.genes = j.at("genes").get<std::vector<double>>();
    if (j.contains("meta")) g.meta = j.at("meta");
  } catch (const json::exception& ex) {
    throw FormatError(std::string("malformed genome: ") + ex.what());
  }
  if (g.n_inter == 0) throw FormatError("genome n_inter must be positive");
  if (g.genotype.size() != genome_dimension(g.n_inter))
    throw FormatError("genome has " + std::to_string(g.genotype.size()) + " genes but N=" +
                      std::to_string(g.n_inter) + " needs " + std::to_string(genome_dimension(g.n_inter)));
  for (double x : g.genotype.genes)
    if (!(x >= -1.0 && x <= 1.0)) throw FormatError("genome gene outside [-1,1]");
  return g;
}

inline void save_genome(const std::filesystem::path& path, const GenomeFile& g) {
  write_text(path, genome_to_json(g).dump(2) + "\n");
}

inline GenomeFile load_genome(const std::filesystem::path& path) {
  try {
    return genome_from_json(json::parse(read_text(path)));
  } catch (const json::parse_error& ex) {
    throw FormatError("genome '" + path.string() + "' is not valid JSON: " + ex.what());
  }
}

// ---------------------------------------------------------------------------
// Run logs: one JSON object per generation

inline json summary_json(const std::optional<Summary>& s) {
  if (!s) return nullptr;
  return json{{"best", s->best}, {"mean", s->mean}, {"worst", s->worst}};
}

inline json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json generation_to_json(const GenerationStats& g, const RunRecord& run) {
  return json{{"generation", g.generation},
              {"combined", summary_json(g.combined)},
              {"categorization", summary_json(g.categorization)},
              {"pole", summary_json(g.pole)},
              {"best_index", g.best_index},
              {"best_fitness",
               {{"combined", g.best_fitness.combined},
                {"categorization", optional_json(g.best_fitness.categorization)},
                {"pole", optional_json(g.best_fitness.pole)}}},
              {"best_genome", g.best_genome.genes},
              {"seed", run.seed},
              {"config_hash", run.config_hash}};
}

inline std::string run_log_jsonl(const RunRecord& run) {
  std::string out;
  for (const auto& g : run.generations) out += generation_to_json(g, run).dump() + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Trajectories

inline std::vector<std::string> trajectory_columns(TrialTask task, std::size_t n_inter) {
  std::vector<std::string> cols = {"t", "x_agent", "v_agent"};
  if (task == TrialTask::PoleBalance) {
    cols.push_back("pole_theta");
    cols.push_back("pole_omega");
  } else {
    cols.push_back("object_x");
    cols.push_back("object_y");
  }
  for (std::size_t k = 1; k <= kNumRays; ++k) cols.push_back("I" + std::to_string(k));
  for (std::size_t k = 1; k <= kNumRays; ++k) cols.push_back("s_sensor" + std::to_string(k));
  for (std::size_t k = 1; k <= n_inter; ++k) cols.push_back("s_inter" + std::to_string(k));
  cols.push_back("s_motor_l");
  cols.push_back("s_motor_r");
  cols.push_back("accel");
  return cols;
}

inline std::string trajectory_csv(const TrialResult& r, std::size_t n_inter) {
  std::string out;
  const auto cols = trajectory_columns(r.spec.task, n_inter);
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += "\n";
  for (const auto& s : r.trajectory) {
    std::string line = format_double(s.t) + "," + format_double(s.x) + "," + format_double(s.v) + "," +
                       format_double(s.object_a) + "," + format_double(s.object_b);
    for (double v : s.inputs) line += "," + format_double(v);
    for (double v : s.neural.sensor) line += "," + format_double(v);
    for (std::size_t k = 0; k < n_inter; ++k)
      line += "," + format_double(k < s.neural.inter.size() ? s.neural.inter[k] : 0.0);
    line += "," + format_double(s.neural.motor[0]) + "," + format_double(s.neural.motor[1]);
    line += "," + format_double(s.accel);
    out += line + "\n";
  }
  return out;
}

inline json trial_spec_json(const TrialSpec& s) {
  return json{{"task", to_string(s.task)},
              {"offset", s.offset},
              {"pole_angle", s.pole_angle},
              {"pole_angvel", s.pole_angvel}};
}

inline TrialSpec trial_spec_from_json(const json& j) {
  TrialSpec s;
  const auto task = j.at("task").get<std::string>();
  if (task == "catch") s.task = TrialTask::Catch;
  else if (task == "avoid") s.task = TrialTask::Avoid;
  else if (task == "pole") s.task = TrialTask::PoleBalance;
  else throw FormatError("unknown trial task '" + task + "'");
  s.offset = j.value("offset", 0.0);
  s.pole_angle = j.value("pole_angle", 0.0);
  s.pole_angvel = j.value("pole_angvel", 0.0);
  return s;
}

inline json trial_sidecar(const TrialResult& r, std::size_t n_inter, const std::string& hash, std::uint64_t seed) {
  return json{{"spec", trial_spec_json(r.spec)},
              {"score", r.score},
              {"termination", to_string(r.termination)},
              {"steps", r.steps},
              {"final_distance", r.final_distance},
              {"n_inter", n_inter},
              {"samples", r.trajectory.size()},
              {"config_hash", hash},
              {"seed", seed}};
}

/// Reads a trajectory CSV written by trajectory_csv() back into a TrialResult
/// (spec and score from the sidecar JSON).
inline TrialResult load_trajectory(const std::filesystem::path& csv_path, const std::filesystem::path& sidecar_path) {
  TrialResult r;
  json side;
  try {
    side = json::parse(read_text(sidecar_path));
    r.spec = trial_spec_from_json(side.at("spec"));
    r.score = side.at("score").get<double>();
    r.steps = side.at("steps").get<std::size_t>();
  } catch (const json::exception& ex) {
    throw FormatError("bad sidecar '" + sidecar_path.string() + "': " + ex.what());
  }
  const auto n_inter = side.at("n_inter").get<std::size_t>();
  const auto expected = trajectory_columns(r.spec.task, n_inter);

  std::istringstream in(read_text(csv_path));
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty trajectory '" + csv_path.string() + "'");
  {
    std::vector<std::string> header;
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) header.push_back(cell);
    if (header != expected) throw FormatError("unexpected columns in '" + csv_path.string() + "'");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> v;
    v.reserve(expected.size());
    const char* p = line.data();
    const char* end = p + line.size();
    while (p <= end) {
      const char* comma = std::find(p, end, ',');
      double x = 0.0;
      auto [q, ec] = std::from_chars(p, comma, x);
      if (ec != std::errc{} || q != comma) throw FormatError("bad number in '" + csv_path.string() + "'");
      v.push_back(x);
      p = comma + 1;
    }
    if (v.size() != expected.size()) throw FormatError("wrong field count in '" + csv_path.string() + "'");
    TrajectorySample s;
    std::size_t c = 0;
    s.t = v[c++];
    s.x = v[c++];
    s.v = v[c++];
    s.object_a = v[c++];
    s.object_b = v[c++];
    for (auto& x : s.inputs) x = v[c++];
    for (auto& x : s.neural.sensor) x = v[c++];
    s.neural.inter.resize(n_inter);
    for (auto& x : s.neural.inter) x = v[c++];
    s.neural.motor[0] = v[c++];
    s.neural.motor[1] = v[c++];
    s.accel = v[c++];
    r.trajectory.push_back(std::move(s));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Analysis exports

inline json input_condition_json(const InputCondition& c) {
  return json{{"behavior", to_string(c.behavior)}, {"inputs", c.inputs}, {"provenance", c.provenance}};
}

inline json attractor_json(const Attractor& a) {
  json j{{"kind", to_string(a.kind)},
         {"location", a.location},
         {"basin_count", a.basin_count},
         {"source", input_condition_json(a.source)}};
  if (a.kind == AttractorKind::LimitCycle) {
    j["period"] = a.period;
    j["orbit"] = a.orbit;
  }
  return j;
}

inline json attractor_set_json(const AttractorSet& s) {
  json list = json::array();
  for (const auto& a : s.attractors) list.push_back(attractor_json(a));
  return json{{"behavior", to_string(s.behavior)},
              {"conditions", s.conditions},
              {"non_converged", s.non_converged},
              {"fixed_points", s.count(AttractorKind::FixedPoint)},
              {"limit_cycles", s.count(AttractorKind::LimitCycle)},
              {"attractors", list}};
}

/// Overlap table: one row per attractor per behavior, with the behaviors
/// that share it (greedy matching against every other set).
inline std::string attractor_overlap_csv(std::span<const AttractorSet> sets, double eps) {
  std::size_t n = 0;
  for (const auto& s : sets)
    for (const auto& a : s.attractors) n = std::max(n, a.location.size());
  std::string out = "behavior,index,kind";
  for (std::size_t k = 1; k <= n; ++k) out += ",s" + std::to_string(k);
  out += ",shared_with\n";
  for (std::size_t i = 0; i < sets.size(); ++i) {
    std::vector<std::string> shared(sets[i].attractors.size());
    for (std::size_t j = 0; j < sets.size(); ++j) {
      if (i == j) continue;
      const auto cmp = compare_attractor_sets(sets[i], sets[j], eps);
      for (const auto& [ia, ib] : cmp.shared) {
        if (!shared[ia].empty()) shared[ia] += ";";
        shared[ia] += to_string(sets[j].behavior);
      }
    }
    for (std::size_t a = 0; a < sets[i].attractors.size(); ++a) {
      const auto& att = sets[i].attractors[a];
      out += to_string(sets[i].behavior) + "," + std::to_string(a) + "," + to_string(att.kind);
      for (std::size_t k = 0; k < n; ++k)
        out += "," + (k < att.location.size() ? format_double(att.location[k]) : std::string());
      out += "," + shared[a] + "\n";
    }
  }
  return out;
}

inline json comparison_json(const AttractorSet& a, const AttractorSet& b, const SetComparison& c) {
  json shared = json::array();
  for (const auto& [i, j] : c.shared)
    shared.push_back({{"a", i}, {"b", j}, {"location_a", a.attractors[i].location},
                      {"location_b", b.attractors[j].location}});
  return json{{"a", to_string(a.behavior)}, {"b", to_string(b.behavior)},
              {"shared", shared},          {"only_a", c.only_a},
              {"only_b", c.only_b},        {"shared_count", c.shared.size()}};
}

inline json basin_census_json(const BasinCensus& c) {
  json list = json::array();
  for (std::size_t k = 0; k < c.attractors.size(); ++k)
    list.push_back({{"attractor", attractor_json(c.attractors[k])}, {"count", c.counts[k]}, {"fraction", c.fractions[k]}});
  return json{{"total", c.total}, {"non_converged", c.non_converged}, {"basins", list}};
}

inline json matches_json(std::span<const TransientMatch> m) {
  json list = json::array();
  for (const auto& x : m)
    list.push_back({{"t_a", x.t_a}, {"t_b", x.t_b}, {"delay", x.delay}, {"length", x.length},
                    {"mean_error", x.mean_error}});
  return list;
}

/// Two output series over a matched window, aligned on the window start.
inline std::string aligned_transients_csv(const Series& a, const Series& b, const TransientMatch& m, double dt) {
  const std::size_t n = a.empty() ? 0 : a.front().size();
  std::string out = "t_rel,t_a,t_b";
  for (std::size_t k = 1; k <= n; ++k) out += ",o_a" + std::to_string(k);
  for (std::size_t k = 1; k <= n; ++k) out += ",o_b" + std::to_string(k);
  out += "\n";
  const auto ia0 = static_cast<std::size_t>(std::llround(m.t_a / dt));
  const auto ib0 = static_cast<std::size_t>(std::llround(m.t_b / dt));
  const auto count = static_cast<std::size_t>(std::llround(m.length / dt)) + 1;
  for (std::size_t k = 0; k < count && ia0 + k < a.size() && ib0 + k < b.size(); ++k) {
    std::string line = format_double(static_cast<double>(k) * dt) + "," +
                       format_double(static_cast<double>(ia0 + k) * dt) + "," +
                       format_double(static_cast<double>(ib0 + k) * dt);
    for (double v : a[ia0 + k]) line += "," + format_double(v);
    for (double v : b[ib0 + k]) line += "," + format_double(v);
    out += line + "\n";
  }
  return out;
}

inline json sensory_context_json(const SensoryContext& ctx) {
  json list = json::array();
  for (std::size_t k = 0; k < ctx.size(); ++k)
    list.push_back({{"ray", k + 1}, {"mean", ctx[k].mean}, {"peak", ctx[k].peak},
                    {"active_fraction", ctx[k].active_fraction}});
  return list;
}

}  // namespace multifunc
