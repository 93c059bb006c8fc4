#pragma once

// Brute-force reference planner for small instances. Breadth-first search
// over worlds finds the fewest actions; free placements and pull targets come
// from a grid, one representative per distinct symbolic outcome. The minimum
// travel over all shortest skeletons is then searched on the grid
// (depth-first with cost pruning) and refined to the fine grid.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dlgp/bench/instance.hpp"
#include "dlgp/planner.hpp"

namespace dlgp::bench {

struct OracleOptions {
  int max_actions = 6;
  int max_blocks = 5;
  // Grid for the shortest-skeleton search.
  double coarse_step = 0.02;
  // Travel: depth-first search on this grid, then coordinate refinement on
  // the fine grid within one travel cell.
  bool travel = true;
  double travel_step = 0.04;
  double fine_step = 0.005;
  std::size_t max_states = 200000;
  std::int64_t max_travel_calls = 20000000;
};

struct OracleResult {
  int makespan = 0;
  double min_displacement = 0.0;
  Plan plan;
  std::size_t skeletons = 0;  // shortest skeletons compared for travel
};

namespace detail {

inline std::string symbolic_key(const SymbolicState& s) {
  std::ostringstream out;
  for (const auto& [id, sup] : s.on) {
    out << id << ':' << static_cast<int>(sup.kind) << sup.below << ':'
        << s.is_stack_top(id) << s.is_clear(id) << s.is_reachable(id);
    if (auto it = s.near_taller.find(id); it != s.near_taller.end()) {
      for (const BlockId& o : it->second) out << ',' << o;
    }
    out << ';';
  }
  return out.str();
}

// Slot placement onto an empty slot must not land on an intruding block.
inline bool slot_free(const WorldState& w, const Workspace& ws, const GoalSpec& goal,
                      const BlockId& moved) {
  if (!w.stack_at(goal.target, 1e-6).empty()) return true;
  for (const Block& o : w.blocks()) {
    if (o.below || o.id == moved) continue;
    if (point_in_footprint(o.pose, goal.target, ws.collision_margin)) return false;
  }
  return true;
}

// Same geometric test as plan replay for a free keyframe, plus the slot
// footprint: parking on the slot is what the slot action does.
inline bool free_point_ok(const WorldState& w, const Workspace& ws, const GoalSpec& goal,
                          const BlockId& moved, const Vec2& u) {
  if (!ws.table.contains(u, ws.block_size, 0.0)) return false;
  if (goal.has_slot() &&
      point_in_footprint(BlockPose{goal.target.x(), goal.target.y(), 0.0, 0.05, ws.block_size},
                         u, ws.collision_margin)) {
    return false;
  }
  if (!inside_reach(ws.reach, u, 0.0)) return false;
  for (const Block& o : w.blocks()) {
    if (o.below || o.id == moved) continue;
    if (point_in_footprint(o.pose, u, ws.collision_margin)) return false;
  }
  return true;
}

inline std::vector<Vec2> grid(const TableBounds& t, double step) {
  std::vector<Vec2> out;
  const int nx = static_cast<int>(std::floor((t.x_max - t.x_min) / step + 1e-9));
  const int ny = static_cast<int>(std::floor((t.y_max - t.y_min) / step + 1e-9));
  for (int i = 0; i <= nx; ++i) {
    for (int j = 0; j <= ny; ++j) out.emplace_back(t.x_min + i * step, t.y_min + j * step);
  }
  return out;
}

struct Successor {
  Action action;
  Vec2 point;
  WorldState world;
};

// Valid successors of `w`; free and pull points are the closest grid point
// (to the pick) for each distinct symbolic outcome.
inline std::vector<Successor> successors(const WorldState& w, const Workspace& ws,
                                         const GoalSpec& goal,
                                         const std::vector<Vec2>& points) {
  std::vector<Successor> out;
  const SymbolicState s = abstract(w, ws, slot_of(goal));
  for (const Action& a : applicable_actions(s)) {
    if (a.target == TargetKind::kGoalSlot) {
      if (!slot_free(w, ws, goal, a.block)) continue;
      WorldState n = w;
      apply_action(n, goal, a, goal.target);
      out.push_back({a, goal.target, std::move(n)});
      continue;
    }
    const Vec2 pick = w.at(a.block).pose.center();
    std::map<std::string, std::pair<double, Vec2>> best;
    for (const Vec2& u : points) {
      if (!free_point_ok(w, ws, goal, a.block, u)) continue;
      WorldState n = w;
      apply_action(n, goal, a, u);
      const std::string key = symbolic_key(abstract(n, ws, slot_of(goal)));
      const double d = (u - pick).norm();
      auto it = best.find(key);
      if (it == best.end() || d < it->second.first) best[key] = {d, u};
    }
    for (const auto& [key, du] : best) {
      WorldState n = w;
      apply_action(n, goal, a, du.second);
      out.push_back({a, du.second, std::move(n)});
    }
  }
  return out;
}

// Depth-first travel minimization over grid points for a fixed skeleton.
struct TravelSearch {
  const Workspace& ws;
  const GoalSpec& goal;
  const std::vector<Action>& skeleton;
  const std::vector<Vec2>& points;
  double best = std::numeric_limits<double>::infinity();
  std::vector<Vec2> best_keys;
  std::vector<Vec2> keys;
  std::int64_t calls = 0;
  std::int64_t max_calls = 0;

  // Travel is a polyline through picks and places; dropping the points not
  // known yet (free keyframes, and picks of blocks parked at them) only
  // shortens it. Returns the first known point from step k and the length
  // of the known polyline from there.
  std::pair<std::optional<Vec2>, double> known_tail(const WorldState& w, std::size_t k) const {
    std::optional<Vec2> first;
    Vec2 last = Vec2::Zero();
    double len = 0.0;
    std::set<BlockId> parked;
    auto visit = [&](const Vec2& p) {
      if (!first) {
        first = p;
      } else {
        len += (p - last).norm();
      }
      last = p;
    };
    for (std::size_t j = k; j < skeleton.size(); ++j) {
      const Action& a = skeleton[j];
      if (!parked.count(a.block)) visit(w.at(a.block).pose.center());
      if (a.target == TargetKind::kGoalSlot) {
        visit(goal.target);
        parked.erase(a.block);
      } else {
        parked.insert(a.block);
      }
    }
    return {first, len};
  }

  double bound_from(const Vec2& at, const WorldState& w, std::size_t k) const {
    const auto [first, len] = known_tail(w, k);
    return first ? (*first - at).norm() + len : 0.0;
  }

  void run(const WorldState& w, const Vec2& ee, std::size_t k, double cost) {
    if (++calls > max_calls) {
      throw PlanningError(ErrorCode::kOracleExhausted, "travel search limit reached");
    }
    if (cost + bound_from(ee, w, k) >= best - 1e-12) return;
    if (k == skeleton.size()) {
      if (goal_satisfied(w, goal)) {
        best = cost;
        best_keys = keys;
      }
      return;
    }
    const Action& a = skeleton[k];
    if (violated_precondition(abstract(w, ws, slot_of(goal)), a)) return;
    const Vec2 pick = w.at(a.block).pose.center();
    const double to_pick = cost + (pick - ee).norm();
    if (a.target == TargetKind::kGoalSlot) {
      if (!slot_free(w, ws, goal, a.block)) return;
      WorldState n = w;
      apply_action(n, goal, a, goal.target);
      keys.push_back(goal.target);
      run(n, goal.target, k + 1, to_pick + (goal.target - pick).norm());
      keys.pop_back();
      return;
    }
    // The tail after this step does not depend on u unless the block is
    // picked again, which the tail already skips.
    const auto [first, len] = known_tail(w, k + 1);
    std::vector<std::pair<double, Vec2>> cand;
    for (const Vec2& u : points) {
      const double lb = to_pick + (u - pick).norm() + (first ? (*first - u).norm() + len : 0.0);
      if (lb >= best) continue;
      if (free_point_ok(w, ws, goal, a.block, u)) cand.emplace_back(lb, u);
    }
    std::sort(cand.begin(), cand.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    for (const auto& [lb, u] : cand) {
      if (lb >= best) break;
      WorldState n = w;
      apply_action(n, goal, a, u);
      keys.push_back(u);
      run(n, u, k + 1, to_pick + (u - pick).norm());
      keys.pop_back();
    }
  }
};

inline std::optional<Plan> build_plan(const WorldState& world0, const GoalSpec& goal,
                                      const Workspace& ws, const std::vector<Action>& skeleton,
                                      const std::vector<Vec2>& keys) {
  Plan p;
  p.worlds.push_back(world0);
  WorldState w = world0;
  for (std::size_t k = 0; k < skeleton.size(); ++k) {
    const SymbolicState s = abstract(w, ws, slot_of(goal));
    if (violated_precondition(s, skeleton[k])) return std::nullopt;
    if (skeleton[k].target == TargetKind::kGoalSlot) {
      if (!slot_free(w, ws, goal, skeleton[k].block)) return std::nullopt;
    } else if (!free_point_ok(w, ws, goal, skeleton[k].block, keys[k])) {
      return std::nullopt;
    }
    apply_action(w, goal, skeleton[k], keys[k]);
    p.skeleton.push_back(skeleton[k]);
    p.keyframes.push_back(keys[k]);
    p.worlds.push_back(w);
  }
  if (!goal_satisfied(w, goal)) return std::nullopt;
  p.makespan = static_cast<int>(skeleton.size());
  p.ee_displacement = plan_displacement(p, ws);
  return p;
}

}  // namespace detail

/// Shortest makespan and least travel for a small instance. Throws
/// Exhausted outside the size limits or when the search runs out.
inline OracleResult oracle_plan(const Instance& inst, const OracleOptions& opt = {}) {
  if (static_cast<int>(inst.world0.size()) > opt.max_blocks || opt.max_actions > 6) {
    throw PlanningError(ErrorCode::kOracleExhausted,
                        "oracle is limited to 5 blocks and 6 actions");
  }
  const Workspace& ws = inst.ws;
  const GoalSpec& goal = inst.goal;
  for (const BlockId& id : goal.stack) inst.world0.at(id);
  OracleResult res;
  if (goal_satisfied(inst.world0, goal)) {
    res.plan.worlds.push_back(inst.world0);
    return res;
  }

  // Breadth-first search over symbolic outcomes. Each state keeps every
  // (parent, action) edge from the previous level so that all shortest
  // skeletons can be enumerated.
  const std::vector<Vec2> coarse = detail::grid(ws.table, opt.coarse_step);
  struct Node {
    WorldState world;
    std::vector<std::pair<int, Action>> in;
  };
  std::vector<Node> nodes{{inst.world0, {}}};
  std::map<std::string, int> seen{
      {detail::symbolic_key(abstract(inst.world0, ws, slot_of(goal))), 0}};
  std::vector<int> frontier{0};
  std::vector<int> goals;
  for (int depth = 1; depth <= opt.max_actions && goals.empty(); ++depth) {
    std::vector<int> next;
    std::map<std::string, int> level;
    for (int i : frontier) {
      const WorldState w = nodes[static_cast<std::size_t>(i)].world;
      for (detail::Successor& sc : detail::successors(w, ws, goal, coarse)) {
        const std::string key = detail::symbolic_key(abstract(sc.world, ws, slot_of(goal)));
        if (seen.count(key)) continue;
        auto it = level.find(key);
        if (it != level.end()) {
          nodes[static_cast<std::size_t>(it->second)].in.emplace_back(i, sc.action);
          continue;
        }
        const bool reached = goal_satisfied(sc.world, goal);
        nodes.push_back({std::move(sc.world), {{i, sc.action}}});
        const int idx = static_cast<int>(nodes.size()) - 1;
        level[key] = idx;
        (reached ? goals : next).push_back(idx);
        if (nodes.size() > opt.max_states) {
          throw PlanningError(ErrorCode::kOracleExhausted, "state limit reached");
        }
      }
    }
    seen.insert(level.begin(), level.end());
    frontier = std::move(next);
  }
  if (goals.empty()) {
    throw PlanningError(ErrorCode::kOracleExhausted,
                        "no plan within " + std::to_string(opt.max_actions) + " actions");
  }
  std::set<std::vector<Action>> shortest;
  std::vector<Action> suffix;
  std::function<void(int)> unwind = [&](int j) {
    if (j == 0) {
      shortest.emplace(suffix.rbegin(), suffix.rend());
      return;
    }
    for (const auto& [parent, a] : nodes[static_cast<std::size_t>(j)].in) {
      suffix.push_back(a);
      unwind(parent);
      suffix.pop_back();
    }
  };
  for (int g : goals) unwind(g);

  // Least travel over the shortest skeletons.
  res.makespan = static_cast<int>(shortest.begin()->size());
  res.skeletons = shortest.size();
  if (!opt.travel) {
    res.min_displacement = std::numeric_limits<double>::quiet_NaN();
    return res;
  }
  res.min_displacement = std::numeric_limits<double>::infinity();
  const std::vector<Vec2> travel_grid = detail::grid(ws.table, opt.travel_step);
  for (const std::vector<Action>& skel : shortest) {
    detail::TravelSearch search{ws, goal, skel, travel_grid};
    search.max_calls = opt.max_travel_calls;
    search.run(inst.world0, home_position(ws), 0, 0.0);
    if (search.best_keys.empty()) continue;
    std::vector<Vec2> keys = search.best_keys;
    double cost = search.best;
    // Coordinate refinement on the fine grid around each free keyframe.
    for (bool improved = true; improved;) {
      improved = false;
      for (std::size_t k = 0; k < skel.size(); ++k) {
        if (skel[k].target == TargetKind::kGoalSlot) continue;
        const Vec2 centre = keys[k];
        const int r = static_cast<int>(std::lround(opt.travel_step / opt.fine_step));
        for (int dx = -r; dx <= r; ++dx) {
          for (int dy = -r; dy <= r; ++dy) {
            std::vector<Vec2> trial = keys;
            trial[k] = centre + opt.fine_step * Vec2(dx, dy);
            const auto p = detail::build_plan(inst.world0, goal, ws, skel, trial);
            if (p && p->ee_displacement < cost - 1e-12) {
              cost = p->ee_displacement;
              keys = trial;
              improved = true;
            }
          }
        }
      }
    }
    if (cost < res.min_displacement) {
      res.min_displacement = cost;
      res.plan = *detail::build_plan(inst.world0, goal, ws, skel, keys);
    }
  }
  if (!std::isfinite(res.min_displacement)) {
    throw PlanningError(ErrorCode::kOracleExhausted, "no grid placement for a shortest skeleton");
  }
  return res;
}

}  // namespace dlgp::bench
