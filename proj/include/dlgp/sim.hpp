#pragma once

// Closed-loop execution: observe, plan with DTS, execute the first action,
// apply scheduled disturbances, repeat. Execution teleports blocks to their
// keyframes; there is no physics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "dlgp/planner.hpp"
#include "dlgp/random.hpp"

namespace dlgp {

enum class DisturbanceKind { kDisplace, kTopple, kShuffleStack, kPushOutOfReach };

inline const char* to_string(DisturbanceKind k) {
  switch (k) {
    case DisturbanceKind::kDisplace: return "displace";
    case DisturbanceKind::kTopple: return "topple";
    case DisturbanceKind::kShuffleStack: return "shuffle-stack";
    case DisturbanceKind::kPushOutOfReach: return "push-out-of-reach";
  }
  return "?";
}

inline std::optional<DisturbanceKind> parse_disturbance_kind(const std::string& s) {
  for (DisturbanceKind k : {DisturbanceKind::kDisplace, DisturbanceKind::kTopple,
                            DisturbanceKind::kShuffleStack,
                            DisturbanceKind::kPushOutOfReach}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

struct DisturbanceParams {
  // Any block of the affected stack.
  BlockId block;
  // displace: translation of the whole stack.
  Vec2 delta = Vec2::Zero();
  // push-out-of-reach: how far beyond the reach radius the base lands.
  double beyond = 0.1;
};

struct Disturbance {
  // Fires once this many actions have been executed.
  int after_action = 1;
  DisturbanceKind kind = DisturbanceKind::kDisplace;
  DisturbanceParams params;
  std::uint64_t seed = 0;
};

struct Scenario {
  std::string name;
  WorldState world0;
  GoalSpec goal;
  Workspace ws;
  std::vector<Disturbance> disturbances;
  // Stddev of x/y observation noise per table stack (m).
  double noise_stddev = 0.0;
  int max_replans = 50;
  std::uint64_t seed = 0;
};

struct TraceStep {
  WorldState observed;
  Plan plan;
  Action executed;
  Vec2 keyframe = Vec2::Zero();
  std::optional<Disturbance> disturbance;
};

struct Trace {
  std::vector<TraceStep> steps;
  bool success = false;
  std::string reason;
  int replan_count = 0;
  WorldState final_world;
};

// ---------------------------------------------------------------------------
// Disturbances

/// Exact overlap test for two square footprints (separating axes).
inline bool footprints_overlap(const BlockPose& a, const BlockPose& b, double tol = 1e-9) {
  const Vec2 d = b.center() - a.center();
  for (const BlockPose* p : {&a, &b}) {
    const Mat2 r = rotation_matrix(p->theta);
    for (int k = 0; k < 2; ++k) {
      const Vec2 axis = r.col(k);
      auto extent = [&](const BlockPose& q) {
        const Mat2 rq = rotation_matrix(q.theta);
        return 0.5 * q.size_l *
               (std::abs(axis.dot(rq.col(0))) + std::abs(axis.dot(rq.col(1))));
      };
      if (std::abs(axis.dot(d)) >= extent(a) + extent(b) - tol) return false;
    }
  }
  return true;
}

/// Table blocks overlapping pairwise, as "a/b" strings.
inline std::vector<std::string> overlapping_pairs(const WorldState& w, double tol = 1e-9) {
  std::vector<std::string> out;
  const std::vector<BlockId> bases = w.on_table();
  for (std::size_t i = 0; i < bases.size(); ++i) {
    for (std::size_t j = i + 1; j < bases.size(); ++j) {
      if (footprints_overlap(w.at(bases[i]).pose, w.at(bases[j]).pose, tol)) {
        out.push_back(bases[i] + "/" + bases[j]);
      }
    }
  }
  return out;
}

namespace detail {

inline bool free_spot(const WorldState& w, const Workspace& ws,
                      const std::vector<BlockId>& ignore, const BlockPose& pose) {
  if (!ws.table.contains(pose.center(), pose.size_l * std::sqrt(2.0))) return false;
  for (const BlockId& id : w.on_table()) {
    if (std::find(ignore.begin(), ignore.end(), id) != ignore.end()) continue;
    if (footprints_overlap(w.at(id).pose, pose, -1e-9)) return false;
  }
  return true;
}

[[noreturn]] inline void inapplicable(DisturbanceKind k, const std::string& why) {
  throw PlanningError(ErrorCode::kInapplicableDisturbance,
                      std::string(to_string(k)) + ": " + why);
}

}  // namespace detail

/// Applies one disturbance to `world`. The result keeps the stacking forest
/// and has no overlapping table footprints; otherwise Inapplicable.
inline WorldState inject_disturbance(const WorldState& world, const Workspace& ws,
                                     DisturbanceKind kind, const DisturbanceParams& params,
                                     std::uint64_t seed) {
  if (!world.contains(params.block)) {
    detail::inapplicable(kind, "unknown block " + params.block);
  }
  WorldState w = world;
  Sampler rng(seed);
  const BlockId base = w.base_of(params.block);
  const std::vector<BlockId> stack = w.stack_from(base);

  switch (kind) {
    case DisturbanceKind::kDisplace: {
      if (params.delta.isZero(0.0)) return w;
      BlockPose moved = w.at(base).pose;
      moved.x += params.delta.x();
      moved.y += params.delta.y();
      if (!detail::free_spot(w, ws, {base}, moved)) {
        detail::inapplicable(kind, "target spot is occupied or off the table");
      }
      w.translate_stack(base, params.delta);
      return w;
    }
    case DisturbanceKind::kTopple: {
      if (stack.size() < 2) detail::inapplicable(kind, "stack of " + base + " is a single block");
      const double l = ws.block_size;
      for (std::size_t i = 1; i < stack.size(); ++i) {
        const Block& b = w.at(stack[i]);
        bool placed = false;
        for (int attempt = 0; attempt < 2000 && !placed; ++attempt) {
          const double ring = l * (1.6 + 0.4 * static_cast<double>(attempt / 200));
          const double phi = rng.uniform(-std::numbers::pi, std::numbers::pi);
          BlockPose p = b.pose;
          p.x = w.at(base).pose.x + ring * std::cos(phi);
          p.y = w.at(base).pose.y + ring * std::sin(phi);
          p.theta = normalize_angle(rng.uniform(-std::numbers::pi, std::numbers::pi));
          // The remaining upper blocks are still in the air.
          std::vector<BlockId> ignore(stack.begin() + static_cast<std::ptrdiff_t>(i),
                                      stack.end());
          if (!detail::free_spot(w, ws, ignore, p)) continue;
          w.place_on_table(stack[i], p.center(), p.theta);
          placed = true;
        }
        if (!placed) detail::inapplicable(kind, "no free spot for " + stack[i]);
      }
      return w;
    }
    case DisturbanceKind::kShuffleStack: {
      if (stack.size() < 2) detail::inapplicable(kind, "stack of " + base + " is a single block");
      std::vector<BlockId> order = stack;
      while (order == stack) rng.shuffle(order);
      const BlockPose at = w.at(base).pose;
      // Rebuild bottom-up; lift everything first so the forest stays valid.
      for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
        w.place_on_table(*it, at.center(), at.theta);
      }
      for (std::size_t i = 1; i < order.size(); ++i) w.place_on(order[i], order[i - 1]);
      return w;
    }
    case DisturbanceKind::kPushOutOfReach: {
      if (params.beyond <= 0.0) detail::inapplicable(kind, "beyond must be positive");
      const Vec2 from = w.at(base).pose.center();
      Vec2 dir = from - ws.reach.center;
      dir = dir.norm() > 1e-9 ? dir.normalized() : Vec2(1.0, 0.0);
      const double dist = ws.reach.radius + params.beyond;
      for (int attempt = 0; attempt < 2000; ++attempt) {
        Vec2 d = dir;
        if (attempt > 0) {
          // Spread the direction the longer we fail.
          const double phi = std::atan2(dir.y(), dir.x()) +
                             rng.normal() * std::min(std::numbers::pi, 0.05 * attempt);
          d = Vec2(std::cos(phi), std::sin(phi));
        }
        BlockPose p = w.at(base).pose;
        p.x = ws.reach.center.x() + dist * d.x();
        p.y = ws.reach.center.y() + dist * d.y();
        if (!detail::free_spot(w, ws, {base}, p)) continue;
        w.translate_stack(base, p.center() - from);
        return w;
      }
      detail::inapplicable(kind, "no free spot beyond reach");
    }
  }
  return w;
}

// ---------------------------------------------------------------------------
// Closed loop

/// Observation: each table stack shifted by Gaussian x/y noise. Stacks
/// within the slot tolerance of the goal target are reported on the target,
/// so a finished tower is not seen as displaced.
inline WorldState observe(const WorldState& truth, const Scenario& sc, Sampler& rng) {
  if (sc.noise_stddev <= 0.0) return truth;
  WorldState w = truth;
  for (const BlockId& base : truth.on_table()) {
    const Vec2 noise(sc.noise_stddev * rng.normal(), sc.noise_stddev * rng.normal());
    w.translate_stack(base, noise);
    if (sc.goal.has_slot() &&
        (truth.at(base).pose.center() - sc.goal.target).norm() <= sc.ws.slot_tolerance()) {
      w.translate_stack(base, sc.goal.target - w.at(base).pose.center());
    }
  }
  return w;
}

/// Runs `sc` to completion. Planner errors and the replan cap end the run as
/// a failure with a reason; nothing is thrown for them.
inline Trace closed_loop_run(const Scenario& sc, const PlannerConfig& base_config = {}) {
  if (sc.noise_stddev < 0.0) throw PlanningError(ErrorCode::kInvalidInput, "noise < 0");
  for (std::size_t i = 1; i < sc.disturbances.size(); ++i) {
    if (sc.disturbances[i].after_action <= sc.disturbances[i - 1].after_action) {
      throw PlanningError(ErrorCode::kInvalidInput, "triggers must be strictly increasing");
    }
  }
  PlannerConfig config = base_config;
  config.ws = sc.ws;
  Sampler rng(sc.seed);
  Trace trace;
  WorldState truth = sc.world0;
  std::size_t next_disturbance = 0;
  int executed = 0;

  while (true) {
    const WorldState seen = observe(truth, sc, rng);
    if (goal_satisfied(seen, sc.goal, sc.ws.slot_tolerance())) {
      trace.success = true;
      break;
    }
    if (trace.replan_count >= sc.max_replans) {
      trace.reason = "MaxReplansExceeded";
      break;
    }
    TraceStep step;
    step.observed = seen;
    try {
      step.plan = dts_solve(seen, sc.goal, config);
    } catch (const PlanningError& e) {
      trace.reason = e.what();
      break;
    }
    ++trace.replan_count;
    if (step.plan.skeleton.empty()) {
      trace.reason = "empty plan for an unsatisfied goal";
      break;
    }
    step.executed = step.plan.skeleton.front();
    step.keyframe = step.plan.keyframes.front();
    apply_action(truth, sc.goal, step.executed, step.keyframe);
    ++executed;
    if (next_disturbance < sc.disturbances.size() &&
        sc.disturbances[next_disturbance].after_action == executed) {
      const Disturbance& d = sc.disturbances[next_disturbance++];
      try {
        truth = inject_disturbance(truth, sc.ws, d.kind, d.params, d.seed);
        step.disturbance = d;
      } catch (const PlanningError& e) {
        trace.steps.push_back(std::move(step));
        trace.reason = e.what();
        break;
      }
    }
    trace.steps.push_back(std::move(step));
  }
  trace.final_world = truth;
  return trace;
}

}  // namespace dlgp
