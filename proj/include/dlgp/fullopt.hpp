#pragma once

// Sequence-level refinement: keep the skeleton, treat every free keyframe
// (parking spots and pull landings) as a decision variable, and optimize all
// of them at once against the end-effector travel of the whole plan.
//
// A block placed at a variable position is an obstacle only while it rests
// there, so separation constraints are generated from occupancy intervals.
// Two variable positions are separated by an axis-aligned disjunction on
// their difference, which keeps the model a mixed-integer QP.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dlgp/miqp.hpp"
#include "dlgp/planner.hpp"

namespace dlgp {

// A position along the plan: either a decision variable or a fixed point.
struct PositionRef {
  int var = -1;
  Vec2 fixed = Vec2::Zero();
  double theta = 0.0;

  bool is_var() const { return var >= 0; }
};

// Interval of world indices [from, to] during which `block` rests on the
// table at `pos`.
struct Occupancy {
  BlockId block;
  PositionRef pos;
  int from = 0;
  int to = 0;
};

struct SequenceModel {
  MiqpModel miqp;
  // Plan step whose keyframe each variable stands for.
  std::vector<int> var_step;
  std::vector<Occupancy> occupancy;
  // Travel legs in order; the objective is the weighted sum of their
  // squared lengths.
  std::vector<std::pair<PositionRef, PositionRef>> legs;
  int static_disjunctions = 0;
  int pairwise_disjunctions = 0;
  int clearance_disjunctions = 0;

  int num_vars() const { return static_cast<int>(var_step.size()); }
};

namespace detail {

inline bool frees_keyframe(const Action& a) { return a.target != TargetKind::kGoalSlot; }

// Position of every table block in world k, following the plan's placements.
struct PositionTracker {
  std::map<BlockId, PositionRef> at;

  explicit PositionTracker(const WorldState& w0) {
    for (const Block& b : w0.blocks()) {
      at[b.id] = PositionRef{-1, b.pose.center(), b.pose.theta};
    }
  }
};

inline Vec2 value_of(const PositionRef& r, const VectorXd& v) {
  return r.is_var() ? Vec2(v.segment<2>(2 * r.var)) : r.fixed;
}

inline void add_leg_cost(MiqpModel& m, const PositionRef& a, const PositionRef& b,
                         double weight) {
  if (a.is_var() && b.is_var()) {
    m.add_link(a.var, b.var, weight);
  } else if (a.is_var()) {
    m.add_anchor(a.var, b.fixed, weight);
  } else if (b.is_var()) {
    m.add_anchor(b.var, a.fixed, weight);
  } else {
    m.objective.constant += weight * (a.fixed - b.fixed).squaredNorm();
  }
}

}  // namespace detail

/// Builds the joint model over all free keyframes of `plan`. `leg_weights`
/// (one per leg, default 1) scale the squared legs.
inline SequenceModel build_sequence_model(const Plan& plan, const WorldState& world0,
                                          const GoalSpec& goal, const Workspace& ws,
                                          const std::vector<double>& leg_weights = {}) {
  if (plan.worlds.empty() || !(plan.worlds.front() == world0) ||
      plan.worlds.size() != plan.skeleton.size() + 1 ||
      plan.keyframes.size() != plan.skeleton.size()) {
    throw PlanningError(ErrorCode::kInvalidInput, "plan does not start from world0");
  }
  SequenceModel sm;
  const int K = static_cast<int>(plan.skeleton.size());
  std::vector<int> var_of_step(static_cast<std::size_t>(K), -1);
  for (int k = 0; k < K; ++k) {
    if (detail::frees_keyframe(plan.skeleton[static_cast<std::size_t>(k)])) {
      var_of_step[static_cast<std::size_t>(k)] = static_cast<int>(sm.var_step.size());
      sm.var_step.push_back(k);
    }
  }
  const int n = 2 * sm.num_vars();
  sm.miqp = MiqpModel::with_size(n, ws.big_m());
  MiqpModel& m = sm.miqp;
  const double l = ws.block_size;

  for (int v = 0; v < sm.num_vars(); ++v) {
    m.add_halfspaces(ws.table.halfspaces(l), v, "table");
    m.add_halfspaces(reach_halfspaces(ws.reach), v, "reach");
    if (goal.has_slot()) {
      m.disjunctions.push_back(footprint_disjunction(
          BlockPose{goal.target.x(), goal.target.y(), 0.0, 0.05, l},
          ws.collision_margin, v, n, ws.big_m(), "slot"));
      ++sm.static_disjunctions;
    }
  }

  // Walk the plan, tracking where each block rests.
  detail::PositionTracker track(plan.worlds.front());
  std::map<BlockId, int> since;
  for (const Block& b : plan.worlds.front().blocks()) since[b.id] = 0;
  std::set<std::pair<int, int>> seen_pairs;            // (var, var)
  std::set<std::pair<int, std::string>> seen_static;   // (var, block@from)
  std::set<std::string> seen_clearance;
  PositionRef ee{-1, home_position(ws), 0.0};

  for (int k = 0; k < K; ++k) {
    const Action& a = plan.skeleton[static_cast<std::size_t>(k)];
    const WorldState& w = plan.worlds[static_cast<std::size_t>(k)];
    const PositionRef pick = track.at.at(w.base_of(a.block));

    // Separation of a variable keyframe from every block resting on the
    // table in world k.
    const int v = var_of_step[static_cast<std::size_t>(k)];
    if (v >= 0) {
      for (const Block& o : w.blocks()) {
        if (o.below || o.id == a.block) continue;
        const PositionRef& p = track.at.at(o.id);
        if (p.is_var()) {
          const auto key = std::minmax(v, p.var);
          if (seen_pairs.insert(key).second) {
            m.disjunctions.push_back(separation_disjunction(
                v, p.var, n, l / 2.0 + ws.collision_margin, ws.big_m(),
                "pair " + o.id));
            ++sm.pairwise_disjunctions;
          }
        } else {
          const std::string tag = o.id + "@" + std::to_string(since.at(o.id));
          if (seen_static.insert({v, tag}).second) {
            m.disjunctions.push_back(footprint_disjunction(
                BlockPose{p.fixed.x(), p.fixed.y(), p.theta, o.pose.height, l},
                ws.collision_margin, v, n, ws.big_m(), "block " + tag));
            ++sm.static_disjunctions;
          }
        }
      }
    }

    // The picked block must not end up next to a taller one.
    if (a.kind == ActionKind::kPickPlace && ws.obstruction_rule) {
      const Block& c = w.at(a.block);
      const BlockId c_base = w.base_of(c.id);
      const PositionRef pc = track.at.at(c_base);
      for (const Block& o : w.blocks()) {
        if (o.pose.height <= c.pose.height) continue;
        const BlockId o_base = w.base_of(o.id);
        if (o_base == c_base) continue;
        const PositionRef po = track.at.at(o_base);
        if (!pc.is_var() && !po.is_var()) continue;
        const std::string key = c.id + "@" + std::to_string(since.at(c_base)) + "|" +
                                o.id + "@" + std::to_string(since.at(o_base));
        if (!seen_clearance.insert(key).second) continue;
        const double reach = l + ws.grasp_clearance + 1e-6;
        if (pc.is_var() && po.is_var()) {
          m.disjunctions.push_back(separation_disjunction(
              pc.var, po.var, n, reach, ws.big_m(), "clearance " + key));
        } else {
          const PositionRef& fixed = pc.is_var() ? po : pc;
          const int var = pc.is_var() ? pc.var : po.var;
          m.disjunctions.push_back(footprint_disjunction(
              BlockPose{fixed.fixed.x(), fixed.fixed.y(), 0.0, 0.05, l},
              reach - l / 2.0, var, n, ws.big_m(), "clearance " + key));
        }
        ++sm.clearance_disjunctions;
      }
    }

    // Legs: previous place -> pick -> place.
    const PositionRef place =
        v >= 0 ? PositionRef{v, Vec2::Zero(), 0.0}
               : PositionRef{-1, plan.keyframes[static_cast<std::size_t>(k)], 0.0};
    sm.legs.emplace_back(ee, pick);
    sm.legs.emplace_back(pick, place);
    ee = place;

    // Occupancy bookkeeping and the kinematic update of the tracker.
    const BlockId moved = a.block;
    const PositionRef old = track.at.at(moved);
    if (!w.at(moved).below) {
      sm.occupancy.push_back({moved, old, since.at(moved), k});
    }
    track.at[moved] = place;
    since[moved] = k + 1;
  }
  for (const Block& b : plan.worlds.back().blocks()) {
    if (!b.below) sm.occupancy.push_back({b.id, track.at.at(b.id), since.at(b.id), K});
  }

  for (std::size_t i = 0; i < sm.legs.size(); ++i) {
    const double wgt = i < leg_weights.size() ? leg_weights[i] : 1.0;
    detail::add_leg_cost(m, sm.legs[i].first, sm.legs[i].second, wgt);
  }
  return sm;
}

/// Plan with the same skeleton and the given variable values substituted.
inline Plan apply_sequence_solution(const Plan& plan, const SequenceModel& sm,
                                    const GoalSpec& goal, const Workspace& ws,
                                    const VectorXd& v) {
  Plan out = plan;
  for (int i = 0; i < sm.num_vars(); ++i) {
    out.keyframes[static_cast<std::size_t>(sm.var_step[static_cast<std::size_t>(i)])] =
        v.segment<2>(2 * i);
  }
  WorldState w = out.worlds.front();
  out.worlds.assign(1, w);
  for (std::size_t k = 0; k < out.skeleton.size(); ++k) {
    apply_action(w, goal, out.skeleton[k], out.keyframes[k]);
    out.worlds.push_back(w);
  }
  out.ee_displacement = plan_displacement(out, ws);
  return out;
}

struct FullOptOptions {
  MiqpOptions miqp{1000000};
  // Reweighting rounds turning squared legs into Euclidean legs.
  int reweight_rounds = 12;
  // Re-run branch-and-bound in every round instead of only the first.
  bool rebranch = false;
};

struct FullOptResult {
  Plan plan;
  std::int64_t miqp_nodes = 0;
  int variables = 0;
  int disjunctions = 0;
};

/// Re-optimizes every free keyframe of `plan` jointly. Never returns a plan
/// with more travel than the input; falls back to the input (tagged
/// unrefined) when the node budget is exhausted.
inline FullOptResult optimize_full_detailed(const Plan& plan, const WorldState& world0,
                                            const GoalSpec& goal, const Workspace& ws,
                                            const FullOptOptions& options = {}) {
  FullOptResult res;
  res.plan = plan;
  res.plan.unrefined = false;
  const SequenceModel base = build_sequence_model(plan, world0, goal, ws);
  res.variables = base.num_vars();
  res.disjunctions = static_cast<int>(base.miqp.disjunctions.size());
  if (base.num_vars() == 0) return res;

  const double input_cost = plan.ee_displacement;
  auto consider = [&](const SequenceModel& sm, const VectorXd& v) {
    const Plan cand = apply_sequence_solution(plan, sm, goal, ws, v);
    if (cand.ee_displacement < res.plan.ee_displacement - 1e-12 &&
        cand.ee_displacement <= input_cost + 1e-9 && replay_plan(cand, goal, ws).ok) {
      res.plan = cand;
    }
  };
  auto leg_weights = [&](const SequenceModel& sm, const VectorXd& v) {
    std::vector<double> w;
    for (const auto& [a, b] : sm.legs) {
      const double len =
          (detail::value_of(a, v) - detail::value_of(b, v)).norm();
      w.push_back(1.0 / std::max(len, 1e-3));
    }
    return w;
  };

  VectorXd current(2 * base.num_vars());
  for (int i = 0; i < base.num_vars(); ++i) {
    current.segment<2>(2 * i) =
        plan.keyframes[static_cast<std::size_t>(base.var_step[static_cast<std::size_t>(i)])];
  }
  try {
    // Squared-travel optimum first, then reweighted solves seeded from the
    // input keyframes and from that optimum.
    MiqpOptions mo = options.miqp;
    mo.cutoff = base.miqp.objective.objective(current);
    const MiqpResult sq = branch_and_bound(base.miqp, mo);
    res.miqp_nodes += sq.nodes_expanded;
    std::vector<VectorXd> seeds{current};
    if (sq.optimal()) {
      consider(base, sq.u);
      seeds.push_back(sq.u);
    }
    for (const VectorXd& seed : seeds) {
      VectorXd v = seed;
      std::vector<int> leaf;
      for (int round = 0; round < options.reweight_rounds; ++round) {
        const SequenceModel sm =
            build_sequence_model(plan, world0, goal, ws, leg_weights(base, v));
        if (round == 0 || options.rebranch) {
          mo.cutoff = sm.miqp.objective.objective(v);
          const MiqpResult r = branch_and_bound(sm.miqp, mo);
          res.miqp_nodes += r.nodes_expanded;
          if (!r.optimal()) break;
          leaf = r.fixed_binaries;
          v = r.u;
        } else {
          // Later rounds stay in the convex cell found by the first.
          const QpSolution qp = solve_qp(sm.miqp.node_problem(leaf));
          if (!qp.optimal()) break;
          const bool settled = (qp.v - v).lpNorm<Eigen::Infinity>() < 1e-9;
          v = qp.v;
          if (settled) {
            consider(sm, v);
            break;
          }
        }
        consider(sm, v);
      }
    }
  } catch (const PlanningError& e) {
    if (e.code() != ErrorCode::kNodeBudgetExceeded) throw;
    res.plan = plan;
    res.plan.unrefined = true;
  }
  return res;
}

inline Plan optimize_full(const Plan& plan, const WorldState& world0, const GoalSpec& goal,
                          const Workspace& ws, const FullOptOptions& options = {}) {
  return optimize_full_detailed(plan, world0, goal, ws, options).plan;
}

}  // namespace dlgp
