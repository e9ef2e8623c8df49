#pragma once

// Experiment configuration: JSON mapping, validation and a stable hash that
// is stamped into every artifact.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "multifunc/dynamics.hpp"
#include "multifunc/embodiment.hpp"
#include "multifunc/evolution.hpp"

namespace multifunc {

using json = nlohmann::json;

struct ExperimentConfig {
  EvoConfig evo;
  EnvConfig env;
  AttractorSetOptions analysis;
  TransientMatchOptions transients;
  std::size_t n_runs = 1;
  std::size_t random_agents = 100;  // baseline sample size for cross-eval
  std::string output_dir = "runs";
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 64-bit FNV-1a, rendered as 16 hex digits.
inline std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline json to_json(const ExperimentConfig& c) {
  const auto& e = c.evo;
  const auto& v = c.env;
  const auto& a = c.analysis;
  const auto& t = c.transients;
  return json{
      {"evolution",
       {{"pop_size", e.pop_size},
        {"elite_fraction", e.elite_fraction},
        {"mutation_variance", e.mutation_variance},
        {"n_inter", e.n_inter},
        {"paradigm", to_string(e.paradigm)},
        {"switch_generation", e.switch_generation},
        {"generations", e.generations},
        {"seed", e.seed},
        {"trial_sampling", e.trial_sampling == OffsetSampling::Grid ? "grid" : "random"}}},
      {"environment",
       {{"dt", v.dt},
        {"i_max", v.i_max},
        {"body_diameter", v.body.diameter},
        {"ray_spread", v.body.ray_spread},
        {"ray_range", v.body.ray_range},
        {"object_size", v.object_size},
        {"fall_speed", v.fall_speed},
        {"start_height", v.start_height},
        {"clip_distance", v.clip_distance},
        {"offset_range", v.offset_range},
        {"gravity", v.gravity},
        {"pole_length", v.pole_length},
        {"pole_duration", v.pole_duration},
        {"pole_window", v.pole_window},
        {"pole_max_travel", v.pole_max_travel},
        {"pole_initial_angvel", v.pole_initial_angvel},
        {"clamp_pole_score", v.clamp_pole_score}}},
      {"analysis",
       {{"fp_tol", a.settle.fp_tol},
        {"max_time", a.settle.max_time},
        {"cycle_tol", a.settle.cycle_tol},
        {"eps_loc", a.eps_loc},
        {"sample_interval", a.sample_interval},
        {"grid_points", a.grid_points},
        {"grid_lo", a.grid_lo},
        {"grid_hi", a.grid_hi},
        {"transient_window", t.min_window},
        {"transient_tol", t.tol},
        {"transient_max_shift", std::isfinite(t.max_shift) ? json(t.max_shift) : json(nullptr)}}},
      {"n_runs", c.n_runs},
      {"random_agents", c.random_agents},
      {"output_dir", c.output_dir}};
}

namespace detail {

template <class T>
void read_field(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& ex) {
    throw ConfigError(where + "." + key + ": " + ex.what());
  }
}

inline void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, _] : obj.items())
    if (!known.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

}  // namespace detail

/// Parses a config document. Missing keys keep their defaults; unknown keys
/// and ill-typed values are errors.
inline ExperimentConfig config_from_json(const json& j) {
  using detail::read_field;
  ExperimentConfig c;
  detail::reject_unknown(j, {"evolution", "environment", "analysis", "n_runs", "random_agents", "output_dir"}, "config");
  if (j.contains("evolution")) {
    const auto& e = j["evolution"];
    detail::reject_unknown(e, {"pop_size", "elite_fraction", "mutation_variance", "n_inter", "paradigm",
                               "switch_generation", "generations", "seed", "trial_sampling"},
                           "evolution");
    read_field(e, "pop_size", c.evo.pop_size, "evolution");
    read_field(e, "elite_fraction", c.evo.elite_fraction, "evolution");
    read_field(e, "mutation_variance", c.evo.mutation_variance, "evolution");
    read_field(e, "n_inter", c.evo.n_inter, "evolution");
    read_field(e, "switch_generation", c.evo.switch_generation, "evolution");
    read_field(e, "generations", c.evo.generations, "evolution");
    read_field(e, "seed", c.evo.seed, "evolution");
    std::string paradigm = to_string(c.evo.paradigm), sampling = "grid";
    read_field(e, "paradigm", paradigm, "evolution");
    read_field(e, "trial_sampling", sampling, "evolution");
    try {
      c.evo.paradigm = parse_paradigm(paradigm);
    } catch (const std::invalid_argument& ex) {
      throw ConfigError(std::string("evolution.paradigm: ") + ex.what());
    }
    if (sampling == "grid") c.evo.trial_sampling = OffsetSampling::Grid;
    else if (sampling == "random") c.evo.trial_sampling = OffsetSampling::Random;
    else throw ConfigError("evolution.trial_sampling: expected 'grid' or 'random'");
  }
  if (j.contains("environment")) {
    const auto& v = j["environment"];
    detail::reject_unknown(v, {"dt", "i_max", "body_diameter", "ray_spread", "ray_range", "object_size", "fall_speed",
                               "start_height", "clip_distance", "offset_range", "gravity", "pole_length",
                               "pole_duration", "pole_window", "pole_max_travel", "pole_initial_angvel",
                               "clamp_pole_score"},
                           "environment");
    auto& env = c.env;
    read_field(v, "dt", env.dt, "environment");
    read_field(v, "i_max", env.i_max, "environment");
    read_field(v, "body_diameter", env.body.diameter, "environment");
    read_field(v, "ray_spread", env.body.ray_spread, "environment");
    read_field(v, "ray_range", env.body.ray_range, "environment");
    read_field(v, "object_size", env.object_size, "environment");
    read_field(v, "fall_speed", env.fall_speed, "environment");
    read_field(v, "start_height", env.start_height, "environment");
    read_field(v, "clip_distance", env.clip_distance, "environment");
    read_field(v, "offset_range", env.offset_range, "environment");
    read_field(v, "gravity", env.gravity, "environment");
    read_field(v, "pole_length", env.pole_length, "environment");
    read_field(v, "pole_duration", env.pole_duration, "environment");
    read_field(v, "pole_window", env.pole_window, "environment");
    read_field(v, "pole_max_travel", env.pole_max_travel, "environment");
    read_field(v, "pole_initial_angvel", env.pole_initial_angvel, "environment");
    read_field(v, "clamp_pole_score", env.clamp_pole_score, "environment");
  }
  if (j.contains("analysis")) {
    const auto& a = j["analysis"];
    detail::reject_unknown(a, {"fp_tol", "max_time", "cycle_tol", "eps_loc", "sample_interval", "grid_points",
                               "grid_lo", "grid_hi", "transient_window", "transient_tol", "transient_max_shift"},
                           "analysis");
    read_field(a, "fp_tol", c.analysis.settle.fp_tol, "analysis");
    read_field(a, "max_time", c.analysis.settle.max_time, "analysis");
    read_field(a, "cycle_tol", c.analysis.settle.cycle_tol, "analysis");
    read_field(a, "eps_loc", c.analysis.eps_loc, "analysis");
    read_field(a, "sample_interval", c.analysis.sample_interval, "analysis");
    read_field(a, "grid_points", c.analysis.grid_points, "analysis");
    read_field(a, "grid_lo", c.analysis.grid_lo, "analysis");
    read_field(a, "grid_hi", c.analysis.grid_hi, "analysis");
    read_field(a, "transient_window", c.transients.min_window, "analysis");
    read_field(a, "transient_tol", c.transients.tol, "analysis");
    if (a.contains("transient_max_shift") && !a["transient_max_shift"].is_null())
      read_field(a, "transient_max_shift", c.transients.max_shift, "analysis");
  }
  read_field(j, "n_runs", c.n_runs, "config");
  read_field(j, "random_agents", c.random_agents, "config");
  read_field(j, "output_dir", c.output_dir, "config");

  c.analysis.settle.dt = c.env.dt;
  c.transients.dt = c.env.dt;
  try {
    c.evo.validate();
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(std::string("evolution: ") + ex.what());
  }
  if (!(c.env.dt > 0.0)) throw ConfigError("environment.dt must be positive");
  if (!(c.env.fall_speed > 0.0)) throw ConfigError("environment.fall_speed must be positive");
  if (!(c.env.pole_length > 0.0)) throw ConfigError("environment.pole_length must be positive");
  if (c.n_runs == 0) throw ConfigError("n_runs must be positive");
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& ex) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + ex.what());
  }
  return config_from_json(j);
}

/// Hash of the canonical JSON form.
inline std::string config_hash(const ExperimentConfig& c) { return fnv1a_hex(to_json(c).dump()); }

}  // namespace multifunc
