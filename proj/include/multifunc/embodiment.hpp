#pragma once

// Agent body, ray sensing, falling-object and pole physics, trial runners and
// the two task fitness functions.

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "multifunc/ctrnn.hpp"

namespace multifunc {

inline constexpr double kDegree = std::numbers::pi / 180.0;

struct BodySpec {
  double diameter = 30.0;
  double ray_spread = std::numbers::pi / 6.0;  // total angle covered by the rays
  double ray_range = 265.0;

  /// Ray angle from vertical, positive to the right; index 0 is leftmost.
  /// Computed as (k - 3) * step so rays k and 6 - k are exact negatives.
  double ray_angle(std::size_t k) const {
    const double step = ray_spread / static_cast<double>(kNumRays - 1);
    return (static_cast<double>(k) - 3.0) * step;
  }
};

enum class OffsetSampling { Grid, Random };

/// Environment and physics constants. Defaults are the experiment's values.
struct EnvConfig {
  BodySpec body;
  double dt = kDefaultDt;
  double i_max = 10.0;

  // categorization
  double object_size = 30.0;  // circle diameter and line length
  double fall_speed = 0.3;
  double start_height = 275.0;
  double clip_distance = 45.0;
  double offset_range = 50.0;
  OffsetSampling offset_sampling = OffsetSampling::Grid;
  std::uint64_t offset_seed = 0;

  // pole balancing
  double gravity = 9.8;
  double pole_length = 200.0;
  double pole_duration = 500.0;
  double pole_window = 1.0 * kDegree;  // half-width of a ray's triangular pole response
  double pole_max_travel = 45.0;
  double pole_initial_angvel = 0.1 * kDegree;  // magnitude, radians per time unit
  bool clamp_pole_score = true;

  /// Pole counts as dropped beyond the outermost ray.
  double pole_fail_angle() const { return body.ray_spread / 2.0; }
};

// ---------------------------------------------------------------------------
// Sensing

inline double ray_input_from_distance(double d, double range, double i_max) {
  if (!(d >= 0.0) || d > range) return 0.0;
  return i_max * (1.0 - d / range);
}

/// Unit direction of one ray, angle measured from vertical.
struct RayDirection {
  double angle = 0.0;
  double sin = 0.0;
  double cos = 1.0;

  static RayDirection at(double angle) { return {angle, std::sin(angle), std::cos(angle)}; }
};

using RayFan = std::array<RayDirection, kNumRays>;

inline RayFan make_ray_fan(const BodySpec& body) {
  RayFan fan;
  for (std::size_t k = 0; k < kNumRays; ++k) fan[k] = RayDirection::at(body.ray_angle(k));
  return fan;
}

/// Distance along a ray from (origin_x, 0) to a circle, or +inf. An origin
/// inside the circle gives 0.
inline double ray_circle_distance(double origin_x, const RayDirection& ray, double cx, double cy, double radius) {
  const double dx = cx - origin_x;
  const double dy = cy;
  const double c = dx * dx + dy * dy - radius * radius;
  if (c <= 0.0) return 0.0;
  const double b = dx * ray.sin + dy * ray.cos;
  const double disc = b * b - c;
  if (disc < 0.0 || b < 0.0) return std::numeric_limits<double>::infinity();
  return b - std::sqrt(disc);
}

/// Distance along a ray to a horizontal segment centred at (cx, cy), or +inf.
inline double ray_segment_distance(double origin_x, const RayDirection& ray, double cx, double cy,
                                   double half_length) {
  if (cy < 0.0) return std::numeric_limits<double>::infinity();
  const double t = cy / ray.cos;
  const double hit = (origin_x + t * ray.sin) - cx;
  if (std::abs(hit) > half_length) return std::numeric_limits<double>::infinity();
  return t;
}

enum class ObjectKind { Circle, Line };

struct FallingObject {
  ObjectKind kind = ObjectKind::Circle;
  double x = 0.0;
  double y = 0.0;
  double size = 30.0;
};

inline SensorVector cast_rays(double agent_x, const FallingObject& obj, const RayFan& fan, double range,
                              double i_max) {
  SensorVector in{};
  const double half = obj.size / 2.0;
  if (obj.y - half > range) return in;  // nothing can be within reach
  for (std::size_t k = 0; k < kNumRays; ++k) {
    const double d = obj.kind == ObjectKind::Circle ? ray_circle_distance(agent_x, fan[k], obj.x, obj.y, half)
                                                    : ray_segment_distance(agent_x, fan[k], obj.x, obj.y, half);
    in[k] = ray_input_from_distance(d, range, i_max);
  }
  return in;
}

/// Per-ray inputs for an agent at `agent_x` looking at a falling object.
inline SensorVector cast_rays(double agent_x, const FallingObject& obj, const EnvConfig& env) {
  return cast_rays(agent_x, obj, make_ray_fan(env.body), env.body.ray_range, env.i_max);
}

/// Triangular response of a ray at `ray_angle` to the pole at `pole_angle`:
/// zero outside +-window, peak `i_max` when aligned.
inline double pole_ray_input(double pole_angle, double ray_angle, double window, double i_max) {
  const double off = std::abs(pole_angle - ray_angle);
  if (off >= window) return 0.0;
  return i_max * (1.0 - off / window);
}

inline SensorVector pole_inputs(double pole_angle, const EnvConfig& env) {
  SensorVector in{};
  for (std::size_t k = 0; k < kNumRays; ++k)
    in[k] = pole_ray_input(pole_angle, env.body.ray_angle(k), env.pole_window, env.i_max);
  return in;
}

// ---------------------------------------------------------------------------
// Physics

struct PoleState {
  double angle = 0.0;  // from vertical, positive rightward
  double angvel = 0.0;
};

/// Pendulum on an accelerating base: theta'' = (g/L) sin(theta) - (a/L) cos(theta).
inline PoleState step_pole(PoleState s, double base_accel, double dt, double gravity, double length) {
  const double angacc = (gravity / length) * std::sin(s.angle) - (base_accel / length) * std::cos(s.angle);
  return {s.angle + dt * s.angvel, s.angvel + dt * angacc};
}

struct BodyState {
  double x = 0.0;
  double v = 0.0;

  void advance(double accel, double dt) {
    x += dt * v;
    v += dt * accel;
  }
};

// ---------------------------------------------------------------------------
// Trials

enum class TrialTask { Catch, Avoid, PoleBalance };
enum class Task { Categorization, PoleBalance };

inline std::string to_string(TrialTask t) {
  switch (t) {
    case TrialTask::Catch: return "catch";
    case TrialTask::Avoid: return "avoid";
    case TrialTask::PoleBalance: return "pole";
  }
  return "?";
}

inline std::string to_string(Task t) { return t == Task::Categorization ? "categorization" : "pole"; }

inline Task parse_task(const std::string& s) {
  if (s == "categorization" || s == "cat") return Task::Categorization;
  if (s == "pole" || s == "pole-balance" || s == "pole_balance") return Task::PoleBalance;
  throw std::invalid_argument("unknown task '" + s + "'");
}

struct TrialSpec {
  TrialTask task = TrialTask::Catch;
  double offset = 0.0;        // categorization: initial horizontal object offset
  double pole_angle = 0.0;    // radians
  double pole_angvel = 0.0;   // radians per time unit
};

enum class Termination { ObjectLanded, DurationElapsed, PoleDropped, AgentStrayed };

inline std::string to_string(Termination t) {
  switch (t) {
    case Termination::ObjectLanded: return "object_landed";
    case Termination::DurationElapsed: return "duration_elapsed";
    case Termination::PoleDropped: return "pole_dropped";
    case Termination::AgentStrayed: return "agent_strayed";
  }
  return "?";
}

struct TrajectorySample {
  double t = 0.0;
  double x = 0.0;
  double v = 0.0;
  double object_a = 0.0;  // object x, or pole angle
  double object_b = 0.0;  // object y, or pole angular velocity
  SensorVector inputs{};
  NetworkState neural;
  double accel = 0.0;
};

struct TrialResult {
  TrialSpec spec;
  double score = 0.0;
  Termination termination = Termination::ObjectLanded;
  std::size_t steps = 0;  // Euler steps actually taken
  double final_distance = 0.0;
  std::vector<TrajectorySample> trajectory;
};

/// Categorization score for a final horizontal separation.
inline double categorization_score(ObjectKind kind, double separation, double clip) {
  const double d = std::min(std::abs(separation), clip) / clip;
  return kind == ObjectKind::Circle ? 1.0 - d : d;
}

/// Anything that maps ray inputs to an acceleration once per Euler step.
template <class C>
concept Controller = requires(C c, std::span<const double, kNumRays> in, double dt) {
  c.reset();
  { c.step(in, dt) } -> std::convertible_to<double>;
};

namespace detail {

template <Controller C>
void record(std::vector<TrajectorySample>& out, double t, const BodyState& body, double a, double b,
            const SensorVector& in, const C& controller, double accel) {
  TrajectorySample s;
  s.t = t;
  s.x = body.x;
  s.v = body.v;
  s.object_a = a;
  s.object_b = b;
  s.inputs = in;
  if constexpr (requires { controller.state(); }) s.neural = controller.state();
  s.accel = accel;
  out.push_back(std::move(s));
}

inline std::size_t step_count(double duration, double dt) {
  return static_cast<std::size_t>(std::ceil(duration / dt - 1e-9));
}

}  // namespace detail

/// Object falls from `start_height` at constant speed; the trial ends when it
/// reaches the agent's level and is scored on the horizontal separation.
template <Controller C>
TrialResult run_categorization_trial(C& controller, const TrialSpec& spec, const EnvConfig& env,
                                     bool record = false) {
  if (spec.task != TrialTask::Catch && spec.task != TrialTask::Avoid)
    throw std::invalid_argument("run_categorization_trial: task must be catch or avoid");
  controller.reset();
  FallingObject obj{spec.task == TrialTask::Catch ? ObjectKind::Circle : ObjectKind::Line, spec.offset,
                    env.start_height, env.object_size};
  BodyState body;
  const RayFan fan = make_ray_fan(env.body);
  const std::size_t n = detail::step_count(env.start_height / env.fall_speed, env.dt);
  TrialResult r;
  r.spec = spec;
  if (record) r.trajectory.reserve(n + 1);
  for (std::size_t k = 0; k < n; ++k) {
    obj.y = std::max(0.0, env.start_height - env.fall_speed * env.dt * static_cast<double>(k));
    const SensorVector in = cast_rays(body.x, obj, fan, env.body.ray_range, env.i_max);
    if (record) {
      double a_now;
      if constexpr (requires { controller.acceleration(); }) a_now = controller.acceleration();
      else a_now = 0.0;
      detail::record(r.trajectory, env.dt * static_cast<double>(k), body, obj.x, obj.y, in, controller, a_now);
    }
    const double a = controller.step(in, env.dt);
    if (record) r.trajectory.back().accel = a;
    body.advance(a, env.dt);
  }
  obj.y = 0.0;
  if (record) {
    double a_now = 0.0;
    if constexpr (requires { controller.acceleration(); }) a_now = controller.acceleration();
    detail::record(r.trajectory, env.dt * static_cast<double>(n), body, obj.x, obj.y, cast_rays(body.x, obj, env),
                   controller, a_now);
  }
  r.steps = n;
  r.termination = Termination::ObjectLanded;
  r.final_distance = std::abs(body.x - obj.x);
  r.score = categorization_score(obj.kind, r.final_distance, env.clip_distance);
  return r;
}

/// Pole hinged at the agent centre. Each step before a drop earns cos(6 theta);
/// the total is divided by the full step count so early drops lose the rest.
template <Controller C>
TrialResult run_pole_trial(C& controller, const TrialSpec& spec, const EnvConfig& env, bool record = false) {
  if (spec.task != TrialTask::PoleBalance) throw std::invalid_argument("run_pole_trial: task must be pole");
  if (!(std::abs(spec.pole_angle) <= env.pole_fail_angle()))
    throw std::invalid_argument("run_pole_trial: initial pole angle outside the rays");
  controller.reset();
  BodyState body;
  const double x_start = body.x;
  PoleState pole{spec.pole_angle, spec.pole_angvel};
  const std::size_t n = detail::step_count(env.pole_duration, env.dt);
  const double fail = env.pole_fail_angle();
  TrialResult r;
  r.spec = spec;
  r.termination = Termination::DurationElapsed;
  if (record) r.trajectory.reserve(n + 1);
  double reward = 0.0;
  std::size_t k = 0;
  for (; k < n; ++k) {
    bool stop = false;
    if (std::abs(pole.angle) > fail) {
      r.termination = Termination::PoleDropped;
      stop = true;
    } else if (std::abs(body.x - x_start) > env.pole_max_travel) {
      r.termination = Termination::AgentStrayed;
      stop = true;
    }
    const SensorVector in = pole_inputs(pole.angle, env);
    if (record) {
      double a_now = 0.0;
      if constexpr (requires { controller.acceleration(); }) a_now = controller.acceleration();
      detail::record(r.trajectory, env.dt * static_cast<double>(k), body, pole.angle, pole.angvel, in, controller,
                     a_now);
    }
    if (stop) break;
    reward += std::cos(6.0 * pole.angle);
    const double a = controller.step(in, env.dt);
    pole = step_pole(pole, a, env.dt, env.gravity, env.pole_length);
    body.advance(a, env.dt);
  }
  if (k == n && record) {
    double a_now = 0.0;
    if constexpr (requires { controller.acceleration(); }) a_now = controller.acceleration();
    detail::record(r.trajectory, env.dt * static_cast<double>(n), body, pole.angle, pole.angvel,
                   pole_inputs(pole.angle, env), controller, a_now);
  }
  r.steps = k;
  r.final_distance = std::abs(body.x - x_start);
  r.score = reward / static_cast<double>(n);
  if (env.clamp_pole_score) r.score = std::clamp(r.score, 0.0, 1.0);
  return r;
}

template <Controller C>
TrialResult run_trial(C& controller, const TrialSpec& spec, const EnvConfig& env, bool record = false) {
  return spec.task == TrialTask::PoleBalance ? run_pole_trial(controller, spec, env, record)
                                             : run_categorization_trial(controller, spec, env, record);
}

inline TrialResult run_trial(const AgentParams& params, const TrialSpec& spec, const EnvConfig& env,
                             bool record = false) {
  Network net(params);
  return run_trial(net, spec, env, record);
}

// ---------------------------------------------------------------------------
// Trial sets and task fitness

/// 8 circle trials then 8 line trials. Grid mode spaces the offsets evenly
/// over [-range, range]; random mode draws them uniformly from `offset_seed`.
inline std::vector<TrialSpec> categorization_trials(const EnvConfig& env) {
  constexpr int kPerKind = 8;
  std::vector<double> offsets(kPerKind * 2);
  if (env.offset_sampling == OffsetSampling::Grid) {
    for (int i = 0; i < kPerKind; ++i) {
      const double o = -env.offset_range + 2.0 * env.offset_range * i / (kPerKind - 1);
      offsets[i] = o;
      offsets[kPerKind + i] = o;
    }
  } else {
    std::mt19937_64 rng(env.offset_seed);
    std::uniform_real_distribution<double> u(-env.offset_range, env.offset_range);
    for (auto& o : offsets) o = u(rng);
  }
  std::vector<TrialSpec> out;
  out.reserve(offsets.size());
  for (int i = 0; i < 2 * kPerKind; ++i)
    out.push_back({i < kPerKind ? TrialTask::Catch : TrialTask::Avoid, offsets[i], 0.0, 0.0});
  return out;
}

/// 4 angle magnitudes spread up to 9 degrees, both signs, both initial
/// angular velocities: 16 trials.
inline std::vector<TrialSpec> pole_trials(const EnvConfig& env) {
  constexpr double kMaxAngle = 9.0;
  const double w0 = env.pole_initial_angvel;
  std::vector<TrialSpec> out;
  for (int m = 1; m <= 4; ++m)
    for (double sign : {-1.0, 1.0})
      for (double w : {-w0, w0})
        out.push_back({TrialTask::PoleBalance, 0.0, sign * kMaxAngle * m / 4.0 * kDegree, w});
  return out;
}

inline std::vector<TrialSpec> task_trials(Task task, const EnvConfig& env) {
  return task == Task::Categorization ? categorization_trials(env) : pole_trials(env);
}

template <Controller C>
std::vector<TrialResult> run_trials(C& controller, std::span<const TrialSpec> trials, const EnvConfig& env,
                                    bool record = false) {
  std::vector<TrialResult> out;
  out.reserve(trials.size());
  for (const auto& spec : trials) out.push_back(run_trial(controller, spec, env, record));
  return out;
}

inline double mean_score(std::span<const TrialResult> results) {
  if (results.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : results) s += r.score;
  return s / static_cast<double>(results.size());
}

/// Mean score over the task's 16 trials. The controller is reset before each.
template <Controller C>
double evaluate_task(C& controller, Task task, const EnvConfig& env) {
  const auto trials = task_trials(task, env);
  double s = 0.0;
  for (const auto& spec : trials) s += run_trial(controller, spec, env, false).score;
  return s / static_cast<double>(trials.size());
}

inline double evaluate_task(const AgentParams& params, Task task, const EnvConfig& env) {
  Network net(params);
  return evaluate_task(net, task, env);
}

}  // namespace multifunc
