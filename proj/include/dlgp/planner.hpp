#pragma once

// Backward, target-centric planning: the conflict-driven task graph and the
// dynamic tree search that executes its top action, places it with the
// placement MIQP, and rebuilds the graph from the new world.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dlgp/errors.hpp"
#include "dlgp/miqp.hpp"
#include "dlgp/symbolic.hpp"
#include "dlgp/world.hpp"

namespace dlgp {

// Replacement solver for free placements (not pulls). Returns nullopt when it
// finds no admissible point.
using FreePlacer = std::function<std::optional<Vec2>(
    const WorldState&, const Workspace&, const Action&,
    const std::vector<KeepOut>&, const Vec2& anchor)>;

struct PlannerConfig {
  Workspace ws;
  MiqpOptions miqp;
  // Empty: free placements use the placement MIQP.
  FreePlacer free_placer;
  // Cap on nodes_visited for one solve.
  std::int64_t node_budget = 10000;
  // Cap on executed actions; 0 selects 8 N + 8.
  int max_steps = 0;
  // Nominal duration of one phase, in seconds. Metadata only.
  double phase_duration = 1.0;
};

struct Plan {
  std::vector<Action> skeleton;
  // Placement point of each action: slot target, free point, or pull target.
  std::vector<Vec2> keyframes;
  // worlds[0] is the start; worlds[k] follows skeleton[k-1].
  std::vector<WorldState> worlds;
  double ee_displacement = 0.0;
  int makespan = 0;
  std::int64_t nodes_visited = 0;
  std::int64_t miqp_nodes = 0;
  double phase_duration = 1.0;
  // Set by the sequence optimizer when it fell back to the input keyframes.
  bool unrefined = false;
};

// ---------------------------------------------------------------------------
// Kinematics and cost

/// End-effector rest position before the first action.
inline Vec2 home_position(const Workspace& ws) { return ws.reach.center; }

/// Applies one action with its placement point.
inline void apply_action(WorldState& w, const GoalSpec& goal, const Action& a,
                         const Vec2& point) {
  if (a.target == TargetKind::kGoalSlot) {
    const auto slot = w.stack_at(goal.target, 1e-6);
    if (slot.empty()) {
      w.place_on_table(a.block, goal.target);
    } else {
      w.place_on(a.block, slot.back());
    }
  } else {
    w.place_on_table(a.block, point);
  }
}

/// Summed end-effector travel: home -> pick_1 -> place_1 -> pick_2 -> ...
inline double ee_displacement(const std::vector<Vec2>& picks,
                              const std::vector<Vec2>& places,
                              const Vec2& home) {
  double total = 0.0;
  Vec2 at = home;
  for (std::size_t k = 0; k < picks.size(); ++k) {
    total += (picks[k] - at).norm() + (places[k] - picks[k]).norm();
    at = places[k];
  }
  return total;
}

inline std::vector<Vec2> pick_points(const Plan& plan) {
  std::vector<Vec2> out;
  for (std::size_t k = 0; k < plan.skeleton.size(); ++k) {
    out.push_back(plan.worlds[k].at(plan.skeleton[k].block).pose.center());
  }
  return out;
}

inline double plan_displacement(const Plan& plan, const Workspace& ws) {
  return ee_displacement(pick_points(plan), plan.keyframes, home_position(ws));
}

// ---------------------------------------------------------------------------
// Conflicts and subgoals

enum class ConflictKind { kNotClear, kUnreachable, kObstructed, kSlotOccupied };

inline const char* to_string(ConflictKind k) {
  switch (k) {
    case ConflictKind::kNotClear: return "not_clear";
    case ConflictKind::kUnreachable: return "unreachable";
    case ConflictKind::kObstructed: return "obstructed";
    case ConflictKind::kSlotOccupied: return "slot_occupied";
  }
  return "?";
}

struct Conflict {
  ConflictKind kind;
  // Block that has to move (or be pulled) to resolve the conflict.
  BlockId culprit;
  auto operator<=>(const Conflict&) const = default;
};

/// Whether the footprint of `b` intrudes on the goal slot.
inline bool overlaps_slot(const Block& b, const Vec2& target, const Workspace& ws) {
  const BlockPose slot{target.x(), target.y(), 0.0, b.pose.height, ws.block_size};
  return point_in_footprint(slot, b.pose.center(), ws.collision_margin);
}

/// First symbolic conflict of `a` in `w`, in the order not-clear,
/// unreachable, obstructed, slot.
inline std::optional<Conflict> find_conflict(const WorldState& w,
                                             const Workspace& ws,
                                             const GoalSpec& goal,
                                             const Action& a) {
  const Block& b = w.at(a.block);
  if (!w.is_stack_top(b.id)) {
    return Conflict{ConflictKind::kNotClear, w.top_of(b.id)};
  }
  if (a.kind == ActionKind::kToolPull) return std::nullopt;
  if (!is_reachable(ws, b)) return Conflict{ConflictKind::kUnreachable, b.id};
  const auto obs = obstructors_of(w, ws, b.id);
  if (!obs.empty()) return Conflict{ConflictKind::kObstructed, obs.front()};
  if (a.target != TargetKind::kGoalSlot) return std::nullopt;

  // The slot must hold exactly the goal blocks below `b`, in order.
  std::vector<BlockId> prefix;
  for (const BlockId& id : goal.stack) {
    if (id == b.id) break;
    prefix.push_back(id);
  }
  const auto slot = w.stack_at(goal.target, ws.slot_tolerance());
  if (slot != prefix && !slot.empty()) {
    return Conflict{ConflictKind::kSlotOccupied, slot.back()};
  }
  // Anything else intruding on the slot footprint.
  for (const Block& o : w.blocks()) {
    if (o.below || (!slot.empty() && o.id == slot.front())) continue;
    if (overlaps_slot(o, goal.target, ws)) {
      return Conflict{ConflictKind::kSlotOccupied, w.top_of(o.id)};
    }
  }
  return std::nullopt;
}

/// Goal that removes `conflict`: relocate the culprit, or pull it into reach.
inline GoalSpec sub_goal(const Conflict& conflict) {
  GoalSpec g;
  g.block = conflict.culprit;
  g.kind = conflict.kind == ConflictKind::kUnreachable ? GoalKind::kBringIntoReach
                                                       : GoalKind::kRelocate;
  return g;
}

/// Subgoal for an infeasible action; NoConflict if the action is feasible.
inline GoalSpec sub_goal(const WorldState& w, const Workspace& ws,
                         const GoalSpec& goal, const Action& infeasible) {
  const auto c = find_conflict(w, ws, goal, infeasible);
  if (!c) {
    throw PlanningError(ErrorCode::kNoConflict,
                        infeasible.to_string() + " is feasible");
  }
  return sub_goal(*c);
}

struct TaskGraphResult {
  // back() executes first.
  std::vector<Action> actions;
  std::vector<GoalSpec> subgoals;
};

inline std::optional<Vec2> slot_of(const GoalSpec& g) {
  if (g.has_slot()) return g.target;
  return std::nullopt;
}

/// Conflict-driven task graph: follow succ_dagger from the goal, pushing a
/// subgoal for every conflict until the pending action is feasible.
inline TaskGraphResult task_graph(const WorldState& w, const SymbolicState& s,
                                  const GoalSpec& goal, const Workspace& ws) {
  TaskGraphResult out;
  GoalSpec g = goal;
  Action a = succ_dagger(s, ground(g));
  std::set<std::pair<Action, Conflict>> seen;
  const std::size_t limit = 4 * std::max<std::size_t>(w.size(), 1);
  for (std::size_t iter = 0;; ++iter) {
    out.actions.push_back(a);
    out.subgoals.push_back(g);
    const auto c = find_conflict(w, ws, goal, a);
    if (!c) return out;
    if (!seen.insert({a, *c}).second || iter >= limit) {
      throw PlanningError(ErrorCode::kCycleDetected,
                          a.to_string() + " / " + to_string(c->kind) + " " +
                              c->culprit);
    }
    g = sub_goal(*c);
    a = succ_dagger(s, ground(g));
  }
}

inline TaskGraphResult task_graph(const WorldState& w, const GoalSpec& goal,
                                  const Workspace& ws) {
  return task_graph(w, abstract(w, ws, slot_of(goal)), goal, ws);
}

// ---------------------------------------------------------------------------
// Keep-outs

/// Blocks that will still be picked: unfinished goal blocks, the pending
/// actions' blocks, and transitively whatever sits on or obstructs them.
inline std::set<BlockId> pending_blocks(const WorldState& w, const Workspace& ws,
                                        const GoalSpec& goal,
                                        const std::vector<Action>& pending) {
  std::set<BlockId> out;
  std::vector<BlockId> todo;
  if (goal.has_slot()) {
    const auto slot = w.stack_at(goal.target, ws.slot_tolerance());
    std::size_t ok = 0;
    while (ok < slot.size() && ok < goal.stack.size() && slot[ok] == goal.stack[ok]) {
      ++ok;
    }
    for (std::size_t i = ok; i < goal.stack.size(); ++i) todo.push_back(goal.stack[i]);
  }
  for (const Action& a : pending) todo.push_back(a.block);
  while (!todo.empty()) {
    const BlockId id = todo.back();
    todo.pop_back();
    if (!w.contains(id) || !out.insert(id).second) continue;
    for (auto up = w.above(id); up; up = w.above(*up)) todo.push_back(*up);
    for (const BlockId& o : obstructors_of(w, ws, id)) todo.push_back(o);
  }
  return out;
}

inline bool is_goal_block(const GoalSpec& goal, const BlockId& moved) {
  return std::find(goal.stack.begin(), goal.stack.end(), moved) != goal.stack.end();
}

/// Pending blocks once `moved` has been moved: it stays pending only if a
/// later action or the goal picks it again.
inline std::set<BlockId> pending_after(const WorldState& w, const Workspace& ws,
                                       const GoalSpec& goal, const BlockId& moved,
                                       const std::vector<Action>& later) {
  std::set<BlockId> out = pending_blocks(w, ws, goal, later);
  bool again = false;
  for (const Action& a : later) again = again || a.block == moved;
  // A goal block that is moved away from the slot comes back later.
  if (goal.has_slot() && is_goal_block(goal, moved)) again = true;
  if (!again) out.erase(moved);
  return out;
}

/// Keep-outs for a free placement of `moved`: the goal slot, the grasp
/// clearance of shorter pending blocks, and, if `moved` will be picked again,
/// the clearance of taller blocks.
inline std::vector<KeepOut> placement_keepouts(const WorldState& w,
                                               const Workspace& ws,
                                               const GoalSpec& goal,
                                               const BlockId& moved,
                                               const std::set<BlockId>& pending) {
  std::vector<KeepOut> out;
  const double l = ws.block_size;
  if (goal.has_slot()) {
    out.push_back({BlockPose{goal.target.x(), goal.target.y(), 0.0, 0.05, l},
                   ws.collision_margin, "slot"});
  }
  if (!ws.obstruction_rule) return out;
  const Block& m = w.at(moved);
  // Membership of `moved` itself means it will be picked again.
  const bool moved_pending = pending.count(moved) > 0;
  const double reach = l / 2.0 + ws.grasp_clearance;
  for (const Block& o : w.blocks()) {
    if (o.below || o.id == moved) continue;
    // Tallest block of the stack decides obstruction of or by any member.
    bool shorter_pending = false;
    bool taller = false;
    for (const BlockId& id : w.stack_from(o.id)) {
      const Block& sb = w.at(id);
      if (pending.count(id) && sb.pose.height < m.pose.height) shorter_pending = true;
      if (sb.pose.height > m.pose.height) taller = true;
    }
    if (shorter_pending || (moved_pending && taller)) {
      out.push_back({o.pose, reach, "clearance " + o.id});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dynamic tree search

struct StepPlacement {
  Vec2 point;
  std::int64_t miqp_nodes = 0;
};

/// Placement point for the feasible action `a`.
inline StepPlacement place_action(const WorldState& w, const Workspace& ws,
                                  const GoalSpec& goal, const Action& a,
                                  const std::set<BlockId>& pending,
                                  const MiqpOptions& miqp,
                                  const FreePlacer& placer = {}) {
  if (a.target == TargetKind::kGoalSlot) return {goal.target, 0};
  auto solve = [&](const std::vector<KeepOut>& keepouts) {
    if (placer && a.kind == ActionKind::kPickPlace) {
      MiqpResult r;
      if (auto u = placer(w, ws, a, keepouts, w.at(a.block).pose.center())) {
        r.status = MiqpStatus::kOptimal;
        r.u = *u;
      }
      return r;
    }
    const MiqpModel model =
        a.kind == ActionKind::kToolPull
            ? build_pull_model(w, ws, a.block, keepouts)
            : build_placement_model(w, ws, a, keepouts, w.at(a.block).pose.center());
    return branch_and_bound(model, miqp);
  };
  auto keepouts = placement_keepouts(w, ws, goal, a.block, pending);
  MiqpResult r = solve(keepouts);
  std::int64_t nodes = r.nodes_expanded;
  if (!r.optimal() && keepouts.size() > 1) {
    // Clearance keep-outs only prevent new obstructions; without room for
    // them, fall back to the hard constraints and the slot.
    keepouts.resize(goal.has_slot() ? 1 : 0);
    r = solve(keepouts);
    nodes += r.nodes_expanded;
  }
  if (!r.optimal()) {
    throw PlanningError(ErrorCode::kInfeasible,
                        "no placement for " + a.to_string());
  }
  return {Vec2(r.u(0), r.u(1)), nodes};
}

inline Plan dts_solve(const WorldState& world0, const GoalSpec& goal,
                      const PlannerConfig& config = {}) {
  const Workspace& ws = config.ws;
  for (const BlockId& id : goal.stack) world0.at(id);
  if (!goal.has_slot()) world0.at(goal.block);

  Plan plan;
  plan.phase_duration = config.phase_duration;
  plan.worlds.push_back(world0);
  WorldState w = world0;
  std::set<Action> proposed;
  const int max_steps = config.max_steps > 0
                            ? config.max_steps
                            : 8 * static_cast<int>(world0.size()) + 8;
  std::vector<Vec2> picks;
  while (!goal_satisfied(w, goal)) {
    if (static_cast<int>(plan.skeleton.size()) >= max_steps) {
      throw PlanningError(ErrorCode::kCycleDetected,
                          "no progress after " + std::to_string(max_steps) +
                              " actions");
    }
    const TaskGraphResult tg = task_graph(w, goal, ws);
    for (const Action& a : tg.actions) proposed.insert(a);
    plan.nodes_visited = static_cast<std::int64_t>(proposed.size());
    if (plan.nodes_visited > config.node_budget) {
      throw PlanningError(ErrorCode::kNodeBudgetExceeded,
                          "DTS exceeded " + std::to_string(config.node_budget) +
                              " nodes");
    }
    const Action a = tg.actions.back();
    const std::vector<Action> later(tg.actions.begin(), tg.actions.end() - 1);
    const auto pending = pending_after(w, ws, goal, a.block, later);
    const StepPlacement p =
        place_action(w, ws, goal, a, pending, config.miqp, config.free_placer);
    plan.miqp_nodes += p.miqp_nodes;
    picks.push_back(w.at(a.block).pose.center());
    apply_action(w, goal, a, p.point);
    plan.skeleton.push_back(a);
    plan.keyframes.push_back(p.point);
    plan.worlds.push_back(w);
  }
  plan.makespan = static_cast<int>(plan.skeleton.size());
  plan.ee_displacement = ee_displacement(picks, plan.keyframes, home_position(ws));
  return plan;
}

// ---------------------------------------------------------------------------
// Replay

struct ReplayReport {
  bool ok = true;
  std::vector<std::string> violations;

  void fail(std::string what) {
    ok = false;
    violations.push_back(std::move(what));
  }
};

/// Re-executes a plan from its first world through succ and the kinematics,
/// checking every keyframe geometrically and the goal at the end.
inline ReplayReport replay_plan(const Plan& plan, const GoalSpec& goal,
                                const Workspace& ws, double goal_tol = 1e-6) {
  ReplayReport rep;
  if (plan.worlds.empty()) {
    rep.fail("plan has no initial world");
    return rep;
  }
  if (plan.keyframes.size() != plan.skeleton.size() ||
      plan.worlds.size() != plan.skeleton.size() + 1 ||
      plan.makespan != static_cast<int>(plan.skeleton.size())) {
    rep.fail("inconsistent plan lengths");
    return rep;
  }
  WorldState w = plan.worlds.front();
  std::vector<Vec2> picks;
  for (std::size_t k = 0; k < plan.skeleton.size(); ++k) {
    const Action& a = plan.skeleton[k];
    const std::string tag = "step " + std::to_string(k) + " " + a.to_string();
    if (!w.contains(a.block)) {
      rep.fail(tag + ": unknown block");
      return rep;
    }
    const SymbolicState s = abstract(w, ws, slot_of(goal));
    if (auto v = violated_precondition(s, a)) rep.fail(tag + ": precondition " + *v);
    const Vec2& u = plan.keyframes[k];
    if (a.target == TargetKind::kGoalSlot) {
      if (!goal.has_slot()) rep.fail(tag + ": goal has no slot");
      if ((u - goal.target).norm() > 1e-9) rep.fail(tag + ": keyframe off the slot");
    } else {
      if (!ws.table.contains(u, ws.block_size, 1e-9)) rep.fail(tag + ": off the table");
      if (!inside_reach(ws.reach, u, 1e-7)) rep.fail(tag + ": outside reach");
      for (const Block& o : w.blocks()) {
        if (o.below || o.id == a.block) continue;
        if (point_in_footprint(o.pose, u, ws.collision_margin - 1e-7)) {
          rep.fail(tag + ": overlaps " + o.id);
        }
      }
    }
    picks.push_back(w.at(a.block).pose.center());
    apply_action(w, goal, a, u);
    const WorldState& recorded = plan.worlds[k + 1];
    for (const Block& b : w.blocks()) {
      const Block* r = recorded.find(b.id);
      if (!r || r->below != b.below ||
          (r->pose.center() - b.pose.center()).norm() > 1e-9) {
        rep.fail(tag + ": recorded world differs at " + b.id);
        break;
      }
    }
  }
  if (goal.has_slot() && !goal_satisfied(w, goal, goal_tol)) {
    rep.fail("final world misses the goal");
  }
  const double disp = ee_displacement(picks, plan.keyframes, home_position(ws));
  if (std::abs(disp - plan.ee_displacement) > 1e-6) {
    rep.fail("ee_displacement mismatch");
  }
  return rep;
}

}  // namespace dlgp
