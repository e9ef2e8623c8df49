#pragma once

// Three-layer continuous-time recurrent network used as the agent's nervous
// system: stateful sensory neurons, fully recurrent interneurons and two
// non-recurrent motor neurons. Also holds the genotype <-> parameter map.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace multifunc {

inline constexpr std::size_t kNumRays = 7;
inline constexpr std::size_t kNumMotors = 2;
inline constexpr double kDefaultDt = 0.1;

using SensorVector = std::array<double, kNumRays>;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct ParamRange {
  double lo;
  double hi;

  constexpr double from_gene(double x) const { return lo + (x + 1.0) * 0.5 * (hi - lo); }
  constexpr double to_gene(double v) const { return 2.0 * (v - lo) / (hi - lo) - 1.0; }
  constexpr bool contains(double v) const { return v >= lo && v <= hi; }
};

inline constexpr ParamRange kGainRange{1.0, 20.0};
inline constexpr ParamRange kTauRange{1.0, 2.0};
inline constexpr ParamRange kBiasRange{-4.0, 4.0};
inline constexpr ParamRange kWeightRange{-5.0, 5.0};

/// Number of evolvable parameters for a circuit with `n_inter` interneurons:
/// 3 sensory + 7N sensor->inter + N^2 recurrent + 2N inter bias/tau
/// + 2N inter->motor + 3 motor.
constexpr std::size_t genome_dimension(std::size_t n_inter) {
  return 3 + kNumRays * n_inter + n_inter * n_inter + 2 * n_inter + 2 * n_inter + 3;
}

/// Decoded phenotype. Interneuron gains are not evolved and are fixed at 1.
struct AgentParams {
  std::size_t n_inter = 0;
  double sensory_tau = 1.0;
  double sensory_gain = 1.0;
  double sensory_bias = 0.0;
  std::vector<double> w_sensor_to_inter;  // [k * n_inter + i], k sensory, i interneuron
  std::vector<double> w_inter;            // [j * n_inter + i], weight from j to i
  std::vector<double> inter_bias;
  std::vector<double> inter_tau;
  std::vector<double> w_inter_to_motor;   // [j * 2 + m], m = 0 left, 1 right
  double motor_gain = 1.0;
  double motor_bias = 0.0;
  double motor_tau = 1.0;

  static AgentParams zeros(std::size_t n) {
    AgentParams p;
    p.n_inter = n;
    p.w_sensor_to_inter.assign(kNumRays * n, 0.0);
    p.w_inter.assign(n * n, 0.0);
    p.inter_bias.assign(n, 0.0);
    p.inter_tau.assign(n, 1.0);
    p.w_inter_to_motor.assign(n * kNumMotors, 0.0);
    return p;
  }

  double sensor_weight(std::size_t k, std::size_t i) const { return w_sensor_to_inter[k * n_inter + i]; }
  double inter_weight(std::size_t from, std::size_t to) const { return w_inter[from * n_inter + to]; }
  double motor_weight(std::size_t j, std::size_t m) const { return w_inter_to_motor[j * kNumMotors + m]; }

  bool shape_ok() const {
    return w_sensor_to_inter.size() == kNumRays * n_inter && w_inter.size() == n_inter * n_inter &&
           inter_bias.size() == n_inter && inter_tau.size() == n_inter &&
           w_inter_to_motor.size() == n_inter * kNumMotors;
  }

  /// True when every parameter lies inside its decode range.
  bool in_range() const {
    auto all_in = [](const std::vector<double>& v, ParamRange r) {
      for (double x : v)
        if (!r.contains(x)) return false;
      return true;
    };
    return shape_ok() && kTauRange.contains(sensory_tau) && kGainRange.contains(sensory_gain) &&
           kBiasRange.contains(sensory_bias) && all_in(w_sensor_to_inter, kWeightRange) &&
           all_in(w_inter, kWeightRange) && all_in(inter_bias, kBiasRange) && all_in(inter_tau, kTauRange) &&
           all_in(w_inter_to_motor, kWeightRange) && kGainRange.contains(motor_gain) &&
           kBiasRange.contains(motor_bias) && kTauRange.contains(motor_tau);
  }
};

struct Genotype {
  std::vector<double> genes;

  std::size_t size() const { return genes.size(); }
  bool operator==(const Genotype&) const = default;
};

// Gene layout, frozen for saved genomes:
//   [sensory tau, sensory gain, sensory bias]
//   sensor->inter weights, row-major over (sensory k, interneuron i)
//   recurrent weights, row-major over (from j, to i)
//   interneuron biases (N), interneuron taus (N)
//   inter->motor weights, row-major over (interneuron j, motor m; left then right)
//   [motor gain, motor bias, motor tau]
inline const std::vector<std::string>& genome_layout() {
  static const std::vector<std::string> layout = {
      "sensory_tau[1,2]",       "sensory_gain[1,20]",   "sensory_bias[-4,4]",
      "w_sensor_to_inter[7xN,row-major,-5,5]", "w_inter[NxN,from-major,-5,5]",
      "inter_bias[N,-4,4]",     "inter_tau[N,1,2]",     "w_inter_to_motor[Nx2,row-major,left-right,-5,5]",
      "motor_gain[1,20]",       "motor_bias[-4,4]",     "motor_tau[1,2]"};
  return layout;
}

inline AgentParams decode_genotype(const Genotype& g, std::size_t n_inter) {
  if (n_inter == 0) throw std::invalid_argument("decode_genotype: n_inter must be positive");
  const std::size_t d = genome_dimension(n_inter);
  if (g.size() != d)
    throw std::invalid_argument("decode_genotype: genotype has " + std::to_string(g.size()) +
                                " genes, expected " + std::to_string(d) + " for N=" + std::to_string(n_inter));
  std::size_t pos = 0;
  auto next = [&](ParamRange r) { return r.from_gene(g.genes[pos++]); };
  auto fill = [&](std::vector<double>& out, std::size_t count, ParamRange r) {
    out.resize(count);
    for (auto& v : out) v = next(r);
  };

  AgentParams p;
  p.n_inter = n_inter;
  p.sensory_tau = next(kTauRange);
  p.sensory_gain = next(kGainRange);
  p.sensory_bias = next(kBiasRange);
  fill(p.w_sensor_to_inter, kNumRays * n_inter, kWeightRange);
  fill(p.w_inter, n_inter * n_inter, kWeightRange);
  fill(p.inter_bias, n_inter, kBiasRange);
  fill(p.inter_tau, n_inter, kTauRange);
  fill(p.w_inter_to_motor, n_inter * kNumMotors, kWeightRange);
  p.motor_gain = next(kGainRange);
  p.motor_bias = next(kBiasRange);
  p.motor_tau = next(kTauRange);
  return p;
}

/// Inverse of decode_genotype. Throws if a parameter is outside its range.
inline Genotype encode_params(const AgentParams& p) {
  if (!p.shape_ok()) throw std::invalid_argument("encode_params: inconsistent parameter shapes");
  if (!p.in_range()) throw std::invalid_argument("encode_params: parameter outside its decode range");
  Genotype g;
  g.genes.reserve(genome_dimension(p.n_inter));
  auto put = [&](double v, ParamRange r) { g.genes.push_back(r.to_gene(v)); };
  put(p.sensory_tau, kTauRange);
  put(p.sensory_gain, kGainRange);
  put(p.sensory_bias, kBiasRange);
  for (double v : p.w_sensor_to_inter) put(v, kWeightRange);
  for (double v : p.w_inter) put(v, kWeightRange);
  for (double v : p.inter_bias) put(v, kBiasRange);
  for (double v : p.inter_tau) put(v, kTauRange);
  for (double v : p.w_inter_to_motor) put(v, kWeightRange);
  put(p.motor_gain, kGainRange);
  put(p.motor_bias, kBiasRange);
  put(p.motor_tau, kTauRange);
  return g;
}

/// Left/right mirror image: sensory rows reversed, motor columns swapped.
inline AgentParams mirrored(const AgentParams& p) {
  AgentParams m = p;
  const std::size_t n = p.n_inter;
  for (std::size_t k = 0; k < kNumRays; ++k)
    for (std::size_t i = 0; i < n; ++i)
      m.w_sensor_to_inter[k * n + i] = p.w_sensor_to_inter[(kNumRays - 1 - k) * n + i];
  for (std::size_t j = 0; j < n; ++j) {
    m.w_inter_to_motor[j * kNumMotors + 0] = p.w_inter_to_motor[j * kNumMotors + 1];
    m.w_inter_to_motor[j * kNumMotors + 1] = p.w_inter_to_motor[j * kNumMotors + 0];
  }
  return m;
}

// ---------------------------------------------------------------------------
// Update kernels. All are forward Euler, in place, allocation free.

namespace kernel {

inline void step_sensory(std::span<double, kNumRays> state, std::span<const double, kNumRays> inputs,
                         double tau, double dt) {
  const double k = dt / tau;
  for (std::size_t i = 0; i < kNumRays; ++i) state[i] += k * (-state[i] + inputs[i]);
}

inline void sensory_output(std::span<const double, kNumRays> state, double gain, double bias,
                           std::span<double, kNumRays> out) {
  for (std::size_t i = 0; i < kNumRays; ++i) out[i] = sigmoid(-gain * (state[i] + bias));
}

inline void inter_output(const AgentParams& p, std::span<const double> state, std::span<double> out) {
  for (std::size_t j = 0; j < p.n_inter; ++j) out[j] = sigmoid(state[j] + p.inter_bias[j]);
}

// Sensor-side drive of interneuron i. Terms are summed in mirror-symmetric
// pairs (k, 6-k) so a mirrored agent sees bit-identical drive.
inline double sensor_drive(const AgentParams& p, std::span<const double, kNumRays> sensor_out, std::size_t i) {
  const std::size_t n = p.n_inter;
  const double* w = p.w_sensor_to_inter.data();
  const double t0 = w[0 * n + i] * sensor_out[0] + w[6 * n + i] * sensor_out[6];
  const double t1 = w[1 * n + i] * sensor_out[1] + w[5 * n + i] * sensor_out[5];
  const double t2 = w[2 * n + i] * sensor_out[2] + w[4 * n + i] * sensor_out[4];
  const double t3 = w[3 * n + i] * sensor_out[3];
  return (t0 + t1) + (t2 + t3);
}

/// Right-hand side of the interneuron equation (before dividing by tau),
/// given precomputed interneuron outputs and external drive.
inline double inter_rhs(const AgentParams& p, std::span<const double> state, std::span<const double> inter_out,
                        double drive, std::size_t i) {
  double recurrent = 0.0;
  for (std::size_t j = 0; j < p.n_inter; ++j) recurrent += p.w_inter[j * p.n_inter + i] * inter_out[j];
  return -state[i] + recurrent + drive;
}

/// Euler step of the interneurons. `inter_out` must hold the outputs of the
/// pre-step state; `drive` the sensory drive per interneuron.
inline void step_interneurons(const AgentParams& p, std::span<double> state, std::span<const double> inter_out,
                              std::span<const double> drive, double dt) {
  for (std::size_t i = 0; i < p.n_inter; ++i) {
    const double rhs = inter_rhs(p, state, inter_out, drive[i], i);
    state[i] += dt / p.inter_tau[i] * rhs;
  }
}

inline void step_motors(const AgentParams& p, std::span<double, kNumMotors> state,
                        std::span<const double> inter_out, double dt) {
  const double k = dt / p.motor_tau;
  for (std::size_t m = 0; m < kNumMotors; ++m) {
    double drive = 0.0;
    for (std::size_t j = 0; j < p.n_inter; ++j) drive += p.w_inter_to_motor[j * kNumMotors + m] * inter_out[j];
    state[m] += k * (-state[m] + drive);
  }
}

}  // namespace kernel

// ---------------------------------------------------------------------------
// Value-returning forms of the kernels.

inline SensorVector step_sensory(const SensorVector& state, const SensorVector& inputs, double tau,
                                 double dt = kDefaultDt) {
  SensorVector s = state;
  kernel::step_sensory(s, inputs, tau, dt);
  return s;
}

inline SensorVector sensory_output(const SensorVector& state, double gain, double bias) {
  SensorVector o{};
  kernel::sensory_output(state, gain, bias, o);
  return o;
}

inline std::vector<double> inter_output(const AgentParams& p, std::span<const double> state) {
  std::vector<double> out(p.n_inter);
  kernel::inter_output(p, state, out);
  return out;
}

inline std::vector<double> sensor_drive(const AgentParams& p, const SensorVector& sensor_out) {
  std::vector<double> d(p.n_inter);
  for (std::size_t i = 0; i < p.n_inter; ++i) d[i] = kernel::sensor_drive(p, sensor_out, i);
  return d;
}

inline std::vector<double> step_interneurons(const AgentParams& p, std::span<const double> state,
                                             const SensorVector& sensor_out, double dt = kDefaultDt) {
  if (state.size() != p.n_inter) throw std::invalid_argument("step_interneurons: state size mismatch");
  std::vector<double> s(state.begin(), state.end());
  const auto out = inter_output(p, state);
  const auto drive = sensor_drive(p, sensor_out);
  kernel::step_interneurons(p, s, out, drive, dt);
  return s;
}

inline std::array<double, kNumMotors> step_motors(const AgentParams& p, const std::array<double, kNumMotors>& state,
                                                  std::span<const double> inter_out, double dt = kDefaultDt) {
  if (inter_out.size() != p.n_inter) throw std::invalid_argument("step_motors: output size mismatch");
  auto s = state;
  kernel::step_motors(p, s, inter_out, dt);
  return s;
}

/// Effective horizontal acceleration; positive is rightward.
inline double motor_acceleration(double s_left, double s_right, double gain, double bias) {
  return gain * (sigmoid(s_right + bias) - sigmoid(s_left + bias));
}

struct NetworkState {
  SensorVector sensor{};
  std::vector<double> inter;
  std::array<double, kNumMotors> motor{};

  explicit NetworkState(std::size_t n_inter = 0) : inter(n_inter, 0.0) {}

  void reset() {
    sensor.fill(0.0);
    std::fill(inter.begin(), inter.end(), 0.0);
    motor.fill(0.0);
  }
  bool operator==(const NetworkState&) const = default;
};

/// Stateful closed-loop controller wrapping the kernels. All layers advance
/// synchronously from the pre-step state.
class Network {
 public:
  explicit Network(AgentParams params)
      : params_(std::move(params)), state_(params_.n_inter), inter_out_(params_.n_inter),
        drive_(params_.n_inter) {
    if (params_.n_inter == 0 || !params_.shape_ok())
      throw std::invalid_argument("Network: malformed AgentParams");
  }

  const AgentParams& params() const { return params_; }
  const NetworkState& state() const { return state_; }
  NetworkState& state() { return state_; }

  void reset() { state_.reset(); }

  /// Acceleration produced by the current motor state.
  double acceleration() const {
    return motor_acceleration(state_.motor[0], state_.motor[1], params_.motor_gain, params_.motor_bias);
  }

  /// Returns the acceleration for the current state, then advances every
  /// layer by one Euler step under `inputs`.
  double step(std::span<const double, kNumRays> inputs, double dt) {
    const double a = acceleration();
    kernel::sensory_output(state_.sensor, params_.sensory_gain, params_.sensory_bias, sensor_out_);
    kernel::inter_output(params_, state_.inter, inter_out_);
    for (std::size_t i = 0; i < params_.n_inter; ++i) drive_[i] = kernel::sensor_drive(params_, sensor_out_, i);
    kernel::step_sensory(state_.sensor, inputs, params_.sensory_tau, dt);
    kernel::step_motors(params_, state_.motor, inter_out_, dt);
    kernel::step_interneurons(params_, state_.inter, inter_out_, drive_, dt);
    return a;
  }

 private:
  AgentParams params_;
  NetworkState state_;
  SensorVector sensor_out_{};
  std::vector<double> inter_out_;
  std::vector<double> drive_;
};

}  // namespace multifunc
