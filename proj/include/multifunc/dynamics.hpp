#pragma once

// Reuse analysis on a fixed circuit: autonomous attractors under clamped
// inputs, attractor-set comparison across behaviors, basin census, and
// time-shifted matching of closed-loop transients.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "multifunc/ctrnn.hpp"
#include "multifunc/embodiment.hpp"

namespace multifunc {

enum class Behavior { CircleCatch, LineAvoid, PoleBalance };

inline std::string to_string(Behavior b) {
  switch (b) {
    case Behavior::CircleCatch: return "circle_catch";
    case Behavior::LineAvoid: return "line_avoid";
    case Behavior::PoleBalance: return "pole_balance";
  }
  return "?";
}

inline Behavior behavior_of(TrialTask t) {
  switch (t) {
    case TrialTask::Catch: return Behavior::CircleCatch;
    case TrialTask::Avoid: return Behavior::LineAvoid;
    case TrialTask::PoleBalance: return Behavior::PoleBalance;
  }
  return Behavior::CircleCatch;
}

struct InputCondition {
  Behavior behavior = Behavior::CircleCatch;
  SensorVector inputs{};
  std::string provenance;
};

enum class AttractorKind { FixedPoint, LimitCycle };

inline std::string to_string(AttractorKind k) { return k == AttractorKind::FixedPoint ? "fixed_point" : "limit_cycle"; }

struct Attractor {
  AttractorKind kind = AttractorKind::FixedPoint;
  std::vector<double> location;            // fixed point, or the cycle's recurrence point
  std::vector<std::vector<double>> orbit;  // one period, limit cycles only
  double period = 0.0;
  InputCondition source;
  std::size_t basin_count = 1;
};

struct SettleOptions {
  double dt = kDefaultDt;
  double fp_tol = 1e-8;       // on the infinity norm of the interneuron right-hand side
  double max_time = 5000.0;
  double cycle_tol = 1e-4;
  double min_period = 1.0;
  double reference_interval = 100.0;  // re-anchor the recurrence test this often
  bool check_stability = true;        // probe fixed points and reject saddles
  double stability_probe = 1e-5;
};

enum class SettleStatus { FixedPoint, LimitCycle, NotConverged };

struct SettleResult {
  SettleStatus status = SettleStatus::NotConverged;
  Attractor attractor;  // for NotConverged: the final state in `location`
  double elapsed = 0.0;
};

/// Constant interneuron drive produced by sensory neurons relaxed onto the
/// clamped inputs (their equilibrium is s_k = I_k).
inline std::vector<double> clamped_drive(const AgentParams& p, const SensorVector& inputs) {
  return sensor_drive(p, sensory_output(inputs, p.sensory_gain, p.sensory_bias));
}

/// Infinity norm of the interneuron right-hand side at `state`.
inline double fixed_point_residual(const AgentParams& p, std::span<const double> state, std::span<const double> drive) {
  std::vector<double> out(p.n_inter);
  kernel::inter_output(p, state, out);
  double r = 0.0;
  for (std::size_t i = 0; i < p.n_inter; ++i) r = std::max(r, std::abs(kernel::inter_rhs(p, state, out, drive[i], i)));
  return r;
}

namespace detail {

inline double inf_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

/// Infinity-norm distance from `pt` to the segment [a, b]. The distance is
/// convex in the segment parameter, so a ternary search finds the minimum.
inline double segment_distance(std::span<const double> pt, std::span<const double> a, std::span<const double> b) {
  auto at = [&](double t) {
    double d = 0.0;
    for (std::size_t i = 0; i < pt.size(); ++i) d = std::max(d, std::abs(pt[i] - (a[i] + t * (b[i] - a[i]))));
    return d;
  };
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 60; ++it) {
    const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
    if (at(m1) <= at(m2)) hi = m2;
    else lo = m1;
  }
  return std::min({at(0.0), at(1.0), at(0.5 * (lo + hi))});
}

}  // namespace detail

/// Integrates the interneurons under a clamped input from `s0` until the flow
/// stops (fixed point), the state recurs (limit cycle) or `max_time` passes.
/// Fixed points are reported as found, stable or not.
inline SettleResult settle_plain(const AgentParams& p, const InputCondition& input, std::span<const double> s0,
                           const SettleOptions& opt = {}) {
  if (s0.size() != p.n_inter) throw std::invalid_argument("settle: initial state size mismatch");
  const std::size_t n = p.n_inter;
  const auto drive = clamped_drive(p, input.inputs);
  std::vector<double> s(s0.begin(), s0.end()), prev = s, out(n), rhs(n);

  const auto max_steps = static_cast<std::size_t>(std::llround(opt.max_time / opt.dt));
  const auto ref_every = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(opt.reference_interval / opt.dt)));
  const auto min_period_steps = static_cast<std::size_t>(std::ceil(opt.min_period / opt.dt));
  std::vector<double> ref;
  std::size_t ref_step = 0;
  bool left_ref = false;

  SettleResult result;
  result.attractor.source = input;
  for (std::size_t step = 0; step <= max_steps; ++step) {
    kernel::inter_output(p, s, out);
    double r = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      rhs[i] = kernel::inter_rhs(p, s, out, drive[i], i);
      r = std::max(r, std::abs(rhs[i]));
    }
    if (r < opt.fp_tol) {
      result.status = SettleStatus::FixedPoint;
      result.attractor.kind = AttractorKind::FixedPoint;
      result.attractor.location = s;
      result.elapsed = static_cast<double>(step) * opt.dt;
      return result;
    }

    if (step > 0 && step % ref_every == 0) {
      ref = s;
      ref_step = step;
      left_ref = false;
    } else if (!ref.empty()) {
      // The discrete orbit steps past the reference, so test the last segment.
      const double d = detail::segment_distance(ref, prev, s);
      if (detail::inf_distance(s, ref) > 10.0 * opt.cycle_tol) left_ref = true;
      if (left_ref && d < opt.cycle_tol && step - ref_step >= min_period_steps) {
        const std::size_t period_steps = step - ref_step;
        Attractor& a = result.attractor;
        a.kind = AttractorKind::LimitCycle;
        a.location = s;
        a.period = static_cast<double>(period_steps) * opt.dt;
        std::vector<double> x = s;
        std::vector<double> xo(n);
        for (std::size_t k = 0; k < period_steps; ++k) {
          a.orbit.push_back(x);
          kernel::inter_output(p, x, xo);
          for (std::size_t i = 0; i < n; ++i) rhs[i] = kernel::inter_rhs(p, x, xo, drive[i], i);
          for (std::size_t i = 0; i < n; ++i) x[i] += opt.dt / p.inter_tau[i] * rhs[i];
        }
        result.status = SettleStatus::LimitCycle;
        result.elapsed = static_cast<double>(step) * opt.dt;
        return result;
      }
    }
    prev = s;
    for (std::size_t i = 0; i < n; ++i) s[i] += opt.dt / p.inter_tau[i] * rhs[i];
  }
  result.status = SettleStatus::NotConverged;
  result.attractor.location = s;
  result.elapsed = opt.max_time;
  return result;
}

/// settle_plain() followed by a stability probe: the fixed point is nudged by
/// +-stability_probe along each axis; if any nudge settles elsewhere the
/// point is a saddle (reached only from its stable manifold) and settling
/// continues from that nudge.
inline SettleResult settle(const AgentParams& p, const InputCondition& input, std::span<const double> s0,
                           const SettleOptions& opt = {}) {
  SettleResult r = settle_plain(p, input, s0, opt);
  for (int depth = 0; depth < 8 && opt.check_stability && r.status == SettleStatus::FixedPoint; ++depth) {
    const std::vector<double> fp = r.attractor.location;
    bool escaped = false;
    for (std::size_t i = 0; i < fp.size() && !escaped; ++i) {
      for (double sign : {1.0, -1.0}) {
        std::vector<double> nudged = fp;
        nudged[i] += sign * opt.stability_probe;
        SettleResult q = settle_plain(p, input, nudged, opt);
        if (q.status == SettleStatus::FixedPoint && detail::inf_distance(q.attractor.location, fp) < 10.0 * opt.stability_probe)
          continue;
        q.elapsed += r.elapsed;
        r = std::move(q);
        escaped = true;
        break;
      }
    }
    if (!escaped) break;
  }
  return r;
}

namespace detail {

/// Distance from `pt` to the closed polyline through a cycle's orbit.
inline double orbit_distance(std::span<const double> pt, const Attractor& c) {
  if (c.orbit.empty()) return inf_distance(pt, c.location);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < c.orbit.size(); ++k) {
    const auto& a = c.orbit[k];
    const auto& b = c.orbit[(k + 1) % c.orbit.size()];
    best = std::min(best, segment_distance(pt, a, b));
  }
  return best;
}

}  // namespace detail

/// Distance between attractors under the infinity norm. Fixed points compare
/// by location; cycles by the larger of each recurrence point's distance to
/// the other's orbit; different kinds are infinitely far apart.
inline double attractor_distance(const Attractor& a, const Attractor& b) {
  if (a.kind != b.kind) return std::numeric_limits<double>::infinity();
  if (a.kind == AttractorKind::FixedPoint) return detail::inf_distance(a.location, b.location);
  return std::max(detail::orbit_distance(a.location, b), detail::orbit_distance(b.location, a));
}

struct AttractorSet {
  Behavior behavior = Behavior::CircleCatch;
  std::vector<Attractor> attractors;
  std::size_t conditions = 0;     // distinct input conditions examined
  std::size_t non_converged = 0;  // settle() calls that hit max_time

  /// Adds `a` unless an equivalent attractor within `eps` is present, in
  /// which case that one's basin count grows. Returns the index used.
  std::size_t add(const Attractor& a, double eps) {
    for (std::size_t i = 0; i < attractors.size(); ++i) {
      if (attractor_distance(attractors[i], a) < eps) {
        attractors[i].basin_count += a.basin_count;
        return i;
      }
    }
    attractors.push_back(a);
    return attractors.size() - 1;
  }

  std::size_t count(AttractorKind k) const {
    return static_cast<std::size_t>(
        std::count_if(attractors.begin(), attractors.end(), [k](const Attractor& a) { return a.kind == k; }));
  }
};

/// Cartesian grid with `points_per_dim` points per axis over [lo, hi]^n.
inline std::vector<std::vector<double>> state_grid(std::size_t n, std::size_t points_per_dim, double lo, double hi) {
  std::vector<std::vector<double>> grid;
  if (n == 0 || points_per_dim == 0) return grid;
  std::vector<double> axis(points_per_dim);
  for (std::size_t k = 0; k < points_per_dim; ++k)
    axis[k] = points_per_dim == 1 ? 0.5 * (lo + hi)
                                  : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points_per_dim - 1);
  std::vector<std::size_t> idx(n, 0);
  for (;;) {
    std::vector<double> pt(n);
    for (std::size_t d = 0; d < n; ++d) pt[d] = axis[idx[d]];
    grid.push_back(std::move(pt));
    std::size_t d = 0;
    while (d < n && ++idx[d] == points_per_dim) idx[d++] = 0;
    if (d == n) break;
  }
  return grid;
}

struct AttractorSetOptions {
  SettleOptions settle;
  double eps_loc = 0.05;
  double sample_interval = 5.0;  // time between conditions sampled from a trajectory
  std::size_t grid_points = 5;
  double grid_lo = -15.0;
  double grid_hi = 15.0;
  bool include_visited = true;
};

/// One input condition to analyse, with extra initial states to try.
struct ConditionSeed {
  InputCondition condition;
  std::vector<std::vector<double>> extra_states;
};

/// Input conditions sampled every `sample_interval` along recorded trials,
/// each paired with the interneuron state the agent actually had then.
inline std::vector<ConditionSeed> conditions_from_trajectories(std::span<const TrialResult> trials, double dt,
                                                               double sample_interval) {
  std::vector<ConditionSeed> out;
  const auto every = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(sample_interval / dt)));
  for (std::size_t t = 0; t < trials.size(); ++t) {
    const auto& tr = trials[t];
    for (std::size_t k = 0; k < tr.trajectory.size(); k += every) {
      const auto& smp = tr.trajectory[k];
      ConditionSeed c;
      c.condition.behavior = behavior_of(tr.spec.task);
      c.condition.inputs = smp.inputs;
      c.condition.provenance = "trial=" + std::to_string(t) + " t=" + std::to_string(smp.t) +
                               " rel_a=" + std::to_string(smp.object_a - (tr.spec.task == TrialTask::PoleBalance ? 0.0 : smp.x)) +
                               " b=" + std::to_string(smp.object_b);
      if (!smp.neural.inter.empty()) c.extra_states.push_back(smp.neural.inter);
      out.push_back(std::move(c));
    }
  }
  return out;
}

/// Static object poses for a behavior: objects on a grid of relative
/// positions, or the pole on a grid of angles across the rays.
inline std::vector<ConditionSeed> static_conditions(Behavior b, const EnvConfig& env) {
  std::vector<ConditionSeed> out;
  if (b == Behavior::PoleBalance) {
    const double lim = env.pole_fail_angle();
    for (double deg = -lim / kDegree; deg <= lim / kDegree + 1e-9; deg += 0.5) {
      ConditionSeed c;
      c.condition = {b, pole_inputs(deg * kDegree, env), "pole_deg=" + std::to_string(deg)};
      out.push_back(std::move(c));
    }
    return out;
  }
  const ObjectKind kind = b == Behavior::CircleCatch ? ObjectKind::Circle : ObjectKind::Line;
  for (double dx = -40.0; dx <= 40.0 + 1e-9; dx += 10.0) {
    for (double y = 25.0; y <= 225.0 + 1e-9; y += 50.0) {
      ConditionSeed c;
      c.condition = {b, cast_rays(0.0, FallingObject{kind, dx, y, env.object_size}, env),
                     "rel_x=" + std::to_string(dx) + " y=" + std::to_string(y)};
      out.push_back(std::move(c));
    }
  }
  return out;
}

/// Settles every condition from the state grid (plus the condition's extra
/// states) and collects the distinct attractors. Conditions with identical
/// inputs are analysed once.
inline AttractorSet build_attractor_set(const AgentParams& p, Behavior behavior, std::span<const ConditionSeed> seeds,
                                        const AttractorSetOptions& opt = {}) {
  AttractorSet set;
  set.behavior = behavior;
  const auto grid = state_grid(p.n_inter, opt.grid_points, opt.grid_lo, opt.grid_hi);
  std::set<SensorVector> seen;
  for (const auto& seed : seeds) {
    const bool fresh = seen.insert(seed.condition.inputs).second;
    if (fresh) ++set.conditions;
    std::vector<const std::vector<double>*> starts;
    if (fresh)
      for (const auto& g : grid) starts.push_back(&g);
    if (opt.include_visited)
      for (const auto& e : seed.extra_states) starts.push_back(&e);
    for (const auto* s0 : starts) {
      const auto r = settle(p, seed.condition, *s0, opt.settle);
      if (r.status == SettleStatus::NotConverged) {
        ++set.non_converged;
        continue;
      }
      set.add(r.attractor, opt.eps_loc);
    }
  }
  return set;
}

/// Trajectory-driven conditions plus the static pose grid for `behavior`.
inline AttractorSet build_attractor_set(const AgentParams& p, Behavior behavior, std::span<const TrialResult> trials,
                                        const EnvConfig& env, const AttractorSetOptions& opt = {}) {
  std::vector<TrialResult> mine;
  for (const auto& t : trials)
    if (behavior_of(t.spec.task) == behavior) mine.push_back(t);
  auto seeds = conditions_from_trajectories(mine, env.dt, opt.sample_interval);
  auto stat = static_conditions(behavior, env);
  seeds.insert(seeds.end(), stat.begin(), stat.end());
  return build_attractor_set(p, behavior, seeds, opt);
}

struct SetComparison {
  std::vector<std::pair<std::size_t, std::size_t>> shared;  // (index in a, index in b)
  std::vector<std::size_t> only_a;
  std::vector<std::size_t> only_b;
};

/// Greedy one-to-one matching: candidate pairs closer than `eps` are taken in
/// order of increasing distance while both members are unmatched.
inline SetComparison compare_attractor_sets(const AttractorSet& a, const AttractorSet& b, double eps) {
  std::vector<std::tuple<double, std::size_t, std::size_t>> cand;
  for (std::size_t i = 0; i < a.attractors.size(); ++i)
    for (std::size_t j = 0; j < b.attractors.size(); ++j) {
      const double d = attractor_distance(a.attractors[i], b.attractors[j]);
      if (d < eps) cand.emplace_back(d, i, j);
    }
  std::sort(cand.begin(), cand.end());
  std::vector<bool> used_a(a.attractors.size(), false), used_b(b.attractors.size(), false);
  SetComparison c;
  for (const auto& [d, i, j] : cand) {
    if (used_a[i] || used_b[j]) continue;
    used_a[i] = used_b[j] = true;
    c.shared.emplace_back(i, j);
  }
  std::sort(c.shared.begin(), c.shared.end());
  for (std::size_t i = 0; i < used_a.size(); ++i)
    if (!used_a[i]) c.only_a.push_back(i);
  for (std::size_t j = 0; j < used_b.size(); ++j)
    if (!used_b[j]) c.only_b.push_back(j);
  return c;
}

struct BasinCensus {
  std::vector<Attractor> attractors;
  std::vector<std::size_t> counts;
  std::vector<double> fractions;  // over converged grid points
  std::size_t non_converged = 0;
  std::size_t total = 0;
};

/// Classifies every grid state by the attractor it settles to. `known`
/// attractors keep their order at the front; new ones are appended.
inline BasinCensus basin_census(const AgentParams& p, const InputCondition& input,
                                std::span<const std::vector<double>> grid, std::span<const Attractor> known = {},
                                const SettleOptions& sopt = {}, double eps = 0.05) {
  BasinCensus c;
  c.attractors.assign(known.begin(), known.end());
  c.counts.assign(c.attractors.size(), 0);
  c.total = grid.size();
  for (const auto& s0 : grid) {
    const auto r = settle(p, input, s0, sopt);
    if (r.status == SettleStatus::NotConverged) {
      ++c.non_converged;
      continue;
    }
    std::size_t k = 0;
    for (; k < c.attractors.size(); ++k)
      if (attractor_distance(c.attractors[k], r.attractor) < eps) break;
    if (k == c.attractors.size()) {
      c.attractors.push_back(r.attractor);
      c.counts.push_back(0);
    }
    ++c.counts[k];
  }
  const std::size_t converged = c.total - c.non_converged;
  for (std::size_t n : c.counts)
    c.fractions.push_back(converged ? static_cast<double>(n) / static_cast<double>(converged) : 0.0);
  return c;
}

// ---------------------------------------------------------------------------
// Transient dynamics

using Series = std::vector<std::vector<double>>;  // [time][neuron]

/// Interneuron outputs sigma(s + bias) along a recorded trial.
inline Series inter_output_series(const AgentParams& p, const TrialResult& trial) {
  Series out;
  out.reserve(trial.trajectory.size());
  for (const auto& s : trial.trajectory) out.push_back(inter_output(p, s.neural.inter));
  return out;
}

struct TransientMatchOptions {
  double dt = kDefaultDt;
  double min_window = 50.0;
  double max_shift = std::numeric_limits<double>::infinity();
  double tol = 0.01;
};

struct TransientMatch {
  double t_a = 0.0;     // start time in series a
  double t_b = 0.0;     // start time in series b
  double delay = 0.0;   // t_b - t_a
  double length = 0.0;  // duration covered
  double mean_error = 0.0;
};

/// For every shift, finds maximal stretches where every neuron of a and b
/// agrees within `tol`, keeping those lasting at least `min_window`.
/// Sorted longest first, then by mean error.
inline std::vector<TransientMatch> match_transients(const Series& a, const Series& b,
                                                    const TransientMatchOptions& opt = {}) {
  std::vector<TransientMatch> out;
  if (a.empty() || b.empty()) return out;
  if (a.front().size() != b.front().size()) throw std::invalid_argument("match_transients: neuron count mismatch");
  const auto la = static_cast<long long>(a.size());
  const auto lb = static_cast<long long>(b.size());
  const long long max_shift =
      std::isfinite(opt.max_shift) ? std::llround(opt.max_shift / opt.dt) : std::max(la, lb);
  const auto min_len = static_cast<long long>(std::ceil(opt.min_window / opt.dt - 1e-9));
  const std::size_t n = a.front().size();

  auto close = [&](long long ia, long long ib, double& err) {
    double m = 0.0;
    for (std::size_t k = 0; k < n; ++k) m = std::max(m, std::abs(a[ia][k] - b[ib][k]));
    err = m;
    return m < opt.tol;
  };

  // delay d = ib - ia; index ia = ib - d
  for (long long d = -max_shift; d <= max_shift; ++d) {
    const long long ib_lo = std::max(0LL, d);
    const long long ib_hi = std::min(lb, la + d);  // exclusive
    long long run_start = -1;
    double err_sum = 0.0;
    for (long long ib = ib_lo; ib <= ib_hi; ++ib) {
      double err = 0.0;
      const bool ok = ib < ib_hi && close(ib - d, ib, err);
      if (ok) {
        if (run_start < 0) {
          run_start = ib;
          err_sum = 0.0;
        }
        err_sum += err;
      } else if (run_start >= 0) {
        const long long count = ib - run_start;
        if (count - 1 >= min_len) {
          TransientMatch m;
          m.t_b = static_cast<double>(run_start) * opt.dt;
          m.t_a = static_cast<double>(run_start - d) * opt.dt;
          m.delay = static_cast<double>(d) * opt.dt;
          m.length = static_cast<double>(count - 1) * opt.dt;
          m.mean_error = err_sum / static_cast<double>(count);
          out.push_back(m);
        }
        run_start = -1;
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const TransientMatch& x, const TransientMatch& y) {
    if (x.length != y.length) return x.length > y.length;
    if (x.mean_error != y.mean_error) return x.mean_error < y.mean_error;
    return x.delay < y.delay;
  });
  return out;
}

struct RayActivity {
  double mean = 0.0;
  double peak = 0.0;
  double active_fraction = 0.0;
};

using SensoryContext = std::array<RayActivity, kNumRays>;

/// Per-ray input statistics over samples with t in [t0, t1]. A ray is active
/// on a sample when its input exceeds `threshold`.
inline SensoryContext sensory_context(const TrialResult& trial, double t0, double t1, double threshold = 0.0) {
  SensoryContext ctx{};
  std::size_t count = 0;
  for (const auto& s : trial.trajectory) {
    if (s.t < t0 - 1e-9 || s.t > t1 + 1e-9) continue;
    ++count;
    for (std::size_t k = 0; k < kNumRays; ++k) {
      ctx[k].mean += s.inputs[k];
      ctx[k].peak = std::max(ctx[k].peak, s.inputs[k]);
      if (s.inputs[k] > threshold) ctx[k].active_fraction += 1.0;
    }
  }
  if (count == 0) return ctx;
  for (auto& r : ctx) {
    r.mean /= static_cast<double>(count);
    r.active_fraction /= static_cast<double>(count);
  }
  return ctx;
}

}  // namespace multifunc
