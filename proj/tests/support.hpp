#pragma once

// Shared test helpers. The `ref` namespace is a deliberately plain second
// transcription of the model used as an oracle against the production code.

#include <cmath>
#include <random>
#include <vector>

#include "multifunc/ctrnn.hpp"
#include "multifunc/embodiment.hpp"

namespace testsupport {

using namespace multifunc;

inline Genotype random_genotype(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Genotype g;
  g.genes.resize(genome_dimension(n));
  for (auto& x : g.genes) x = u(rng);
  return g;
}

inline AgentParams random_params(std::size_t n, std::mt19937_64& rng) {
  return decode_genotype(random_genotype(n, rng), n);
}

/// Parameters symmetric under left/right reflection.
inline AgentParams symmetric_params(std::size_t n, std::mt19937_64& rng) {
  AgentParams p = random_params(n, rng);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < n; ++i) p.w_sensor_to_inter[(6 - k) * n + i] = p.w_sensor_to_inter[k * n + i];
  return p;
}

namespace ref {

inline double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct State {
  std::vector<double> sensor = std::vector<double>(7, 0.0);
  std::vector<double> inter;
  std::vector<double> motor = std::vector<double>(2, 0.0);
};

/// One synchronous Euler step of the whole circuit; returns the acceleration
/// of the pre-step motor state.
inline double step(const AgentParams& p, State& st, const std::vector<double>& input, double dt) {
  const std::size_t n = p.n_inter;
  double accel = p.motor_gain * (sig(st.motor[1] + p.motor_bias) - sig(st.motor[0] + p.motor_bias));

  std::vector<double> o(7), y(n);
  for (std::size_t k = 0; k < 7; ++k) o[k] = sig(-p.sensory_gain * (st.sensor[k] + p.sensory_bias));
  for (std::size_t j = 0; j < n; ++j) y[j] = sig(1.0 * (st.inter[j] + p.inter_bias[j]));

  State nx = st;
  for (std::size_t k = 0; k < 7; ++k)
    nx.sensor[k] = st.sensor[k] + dt * (-st.sensor[k] + input[k]) / p.sensory_tau;
  for (std::size_t i = 0; i < n; ++i) {
    double sum = -st.inter[i];
    for (std::size_t j = 0; j < n; ++j) sum += p.w_inter[j * n + i] * y[j];
    for (std::size_t k = 0; k < 7; ++k) sum += p.w_sensor_to_inter[k * n + i] * o[k];
    nx.inter[i] = st.inter[i] + dt * sum / p.inter_tau[i];
  }
  for (std::size_t m = 0; m < 2; ++m) {
    double sum = -st.motor[m];
    for (std::size_t j = 0; j < n; ++j) sum += p.w_inter_to_motor[j * 2 + m] * y[j];
    nx.motor[m] = st.motor[m] + dt * sum / p.motor_tau;
  }
  st = nx;
  return accel;
}

/// Categorization trial for an agent whose acceleration is always zero:
/// the agent stays at x = 0 and the score depends only on the offset.
inline double stationary_categorization_score(bool circle, double offset) {
  const double d = std::min(std::abs(offset), 45.0) / 45.0;
  return circle ? 1.0 - d : d;
}

}  // namespace ref

/// Controller that reads a known target position off the trial and drives
/// there with a fixed gain. Used to check that a perfect trajectory scores 1.
struct ScriptedController {
  std::vector<double> accel;
  std::size_t k = 0;
  void reset() { k = 0; }
  double step(std::span<const double, kNumRays>, double) { return k < accel.size() ? accel[k++] : 0.0; }
};

}  // namespace testsupport
