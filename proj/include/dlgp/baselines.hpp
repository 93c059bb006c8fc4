#pragma once

// Baselines: a forward Monte-Carlo tree search over symbolic actions whose
// nodes are scored with the same single-step placement bound as DTS, and a
// local penalty method for single placements.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dlgp/fullopt.hpp"
#include "dlgp/miqp.hpp"
#include "dlgp/planner.hpp"
#include "dlgp/random.hpp"
#include "dlgp/symbolic.hpp"

namespace dlgp {

// ---------------------------------------------------------------------------
// Local placement

struct LocalNlpOptions {
  int restarts = 20;
  // Restarts are drawn around the initial guess with this stddev (m).
  double restart_spread = 0.1;
  double tolerance = 1e-8;
  double initial_penalty = 10.0;
  // The penalty weight doubles this many times at most.
  int penalty_rounds = 24;
  int max_iterations = 200;
  // Footprints are inflated by this much inside the penalty so that the
  // penalty minimizer ends up strictly outside.
  double safety = 1e-6;
  std::uint64_t seed = 0;
};

struct LocalNlpResult {
  std::optional<Vec2> point;
  int restarts_tried = 0;
  int iterations = 0;
};

struct PenaltySolveResult {
  std::optional<VectorXd> v;
  int restarts_tried = 0;
  int iterations = 0;
};

namespace detail {

// Continuous relaxation of a MiqpModel with hinge penalties. A disjunction
// (branches +x, -x, +y, -y of a square) is penalized by its footprint
// overlap: the product of the penetration depths along both axes, scaled to
// a length. Convex rows get squared hinges.
struct PenaltyProblem {
  const MiqpModel* model = nullptr;
  double safety = 0.0;

  double row_violation(const LinearRow& r, const VectorXd& v) const {
    return r.b + safety * r.a.norm() - r.a.dot(v);
  }

  double value(const VectorXd& v, double mu, VectorXd* grad) const {
    const QpProblem& obj = model->objective;
    double f = obj.objective(v);
    VectorXd g = obj.Q * v + obj.q;
    for (const Disjunction& d : model->disjunctions) {
      double viol[4];
      for (int i = 0; i < 4; ++i) viol[i] = row_violation(d.branches[i], v);
      const int ix = viol[0] < viol[1] ? 0 : 1;
      const int iy = viol[2] < viol[3] ? 2 : 3;
      const double dx = viol[ix];
      const double dy = viol[iy];
      if (dx <= 0.0 || dy <= 0.0) continue;
      // Half-width of the square along x.
      const double half = 0.5 * (viol[0] + viol[1]);
      const double ov = dx * dy / std::max(half, 1e-12);
      f += mu * ov * ov;
      // d(dx)/dv = -a_ix, d(dy)/dv = -a_iy.
      const double k = 2.0 * mu * ov / std::max(half, 1e-12);
      g -= k * (dy * d.branches[ix].a + dx * d.branches[iy].a);
    }
    for (const LinearRow& r : model->convex) {
      const double viol = row_violation(r, v);
      if (viol > 0.0) {
        f += mu * viol * viol;
        g -= 2.0 * mu * viol * r.a;
      }
    }
    if (grad) *grad = g;
    return f;
  }
};

// BFGS with Armijo backtracking; returns the iteration count.
inline int bfgs(const PenaltyProblem& p, double mu, VectorXd& v, double tol,
                int max_iter) {
  const Eigen::Index n = v.size();
  const MatrixXd I = MatrixXd::Identity(n, n);
  const double scale = 1.0 / (2.0 + 2.0 * mu);
  MatrixXd hinv = scale * I;
  VectorXd g;
  double f = p.value(v, mu, &g);
  int it = 0;
  for (; it < max_iter; ++it) {
    if (g.norm() <= tol * std::max(1.0, std::abs(f))) break;
    VectorXd d = -hinv * g;
    if (d.dot(g) >= 0.0) {
      hinv = scale * I;
      d = -hinv * g;
    }
    double t = 1.0;
    VectorXd g_new;
    double f_new = p.value(v + t * d, mu, &g_new);
    while (f_new > f + 1e-4 * t * g.dot(d) && t > 1e-12) {
      t *= 0.5;
      f_new = p.value(v + t * d, mu, &g_new);
    }
    const VectorXd s = t * d;
    v += s;
    if (s.norm() <= tol * std::max(1.0, v.norm())) break;
    const VectorXd y = g_new - g;
    f = f_new;
    g = g_new;
    const double sy = s.dot(y);
    if (sy > 1e-16) {
      const double rho = 1.0 / sy;
      hinv = (I - rho * s * y.transpose()) * hinv * (I - rho * y * s.transpose()) +
             rho * s * s.transpose();
    }
  }
  return it;
}

}  // namespace detail

/// Penalty continuation with BFGS on the continuous relaxation of `model`,
/// from `init` and then from Gaussian restarts around it. A point counts only
/// if `verify` accepts it.
inline PenaltySolveResult local_penalty_solve(
    const MiqpModel& model, const VectorXd& init, const LocalNlpOptions& options,
    const std::function<bool(const VectorXd&)>& verify) {
  detail::PenaltyProblem p{&model, options.safety};
  PenaltySolveResult res;
  Sampler rng(options.seed);
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    VectorXd v = init;
    if (r > 0) {
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        v(i) += options.restart_spread * rng.normal();
      }
    }
    ++res.restarts_tried;
    double mu = options.initial_penalty;
    for (int round = 0; round <= options.penalty_rounds; ++round) {
      res.iterations += detail::bfgs(p, mu, v, options.tolerance, options.max_iterations);
      if (verify(v)) {
        res.v = v;
        return res;
      }
      mu *= 2.0;
    }
  }
  return res;
}

/// Whether `u` is an admissible free placement for `moved`.
inline bool placement_admissible(const WorldState& w, const Workspace& ws,
                                 const BlockId& moved,
                                 const std::vector<KeepOut>& keepouts, const Vec2& u) {
  if (!ws.table.contains(u, ws.block_size, 0.0)) return false;
  if (!inside_reach(ws.reach, u, 0.0)) return false;
  for (const Block& o : w.blocks()) {
    if (o.below || o.id == moved) continue;
    if (point_in_footprint(o.pose, u, ws.collision_margin)) return false;
  }
  for (const KeepOut& k : keepouts) {
    if (point_in_footprint(k.pose, u, k.margin)) return false;
  }
  return true;
}

/// Local solver for one free placement of `action`'s block: the placement
/// model's travel cost with hinge penalties, started at `init`. The returned
/// point is verified exactly; nullopt if no restart verifies.
inline LocalNlpResult local_nlp_place(const WorldState& w, const Workspace& ws,
                                      const Action& action,
                                      const std::vector<KeepOut>& keepouts,
                                      const Vec2& init,
                                      const LocalNlpOptions& options = {}) {
  const MiqpModel m =
      build_placement_model(w, ws, action, keepouts, w.at(action.block).pose.center());
  const PenaltySolveResult r =
      local_penalty_solve(m, init, options, [&](const VectorXd& v) {
        return placement_admissible(w, ws, action.block, keepouts, Vec2(v(0), v(1)));
      });
  LocalNlpResult out;
  out.restarts_tried = r.restarts_tried;
  out.iterations = r.iterations;
  if (r.v) out.point = Vec2((*r.v)(0), (*r.v)(1));
  return out;
}

/// FreePlacer running the local solver from the pick point. Each call draws
/// a fresh restart seed from one deterministic stream.
inline FreePlacer make_local_placer(LocalNlpOptions options = {}) {
  auto counter = std::make_shared<std::uint64_t>(0);
  return [options, counter](const WorldState& w, const Workspace& ws,
                            const Action& a, const std::vector<KeepOut>& keepouts,
                            const Vec2& anchor) -> std::optional<Vec2> {
    LocalNlpOptions o = options;
    o.seed = options.seed * 1000003ULL + (*counter)++;
    return local_nlp_place(w, ws, a, keepouts, anchor, o).point;
  };
}

struct LocalSequenceResult {
  std::optional<Plan> plan;
  int restarts_tried = 0;
  int iterations = 0;
};

/// The local solver on the joint keyframe problem of a fixed skeleton, from
/// keyframes drawn uniformly over the table. Success means an exactly
/// feasible, replayable plan; no other solution is borrowed.
inline LocalSequenceResult local_nlp_sequence(const Plan& plan, const WorldState& world0,
                                              const GoalSpec& goal, const Workspace& ws,
                                              const LocalNlpOptions& options = {}) {
  const SequenceModel sm = build_sequence_model(plan, world0, goal, ws);
  LocalSequenceResult out;
  if (sm.num_vars() == 0) {
    out.plan = plan;
    return out;
  }
  Sampler rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
  VectorXd init(2 * sm.num_vars());
  for (Eigen::Index i = 0; i < init.size(); i += 2) {
    init(i) = rng.uniform(ws.table.x_min, ws.table.x_max);
    init(i + 1) = rng.uniform(ws.table.y_min, ws.table.y_max);
  }
  std::optional<Plan> found;
  const PenaltySolveResult r =
      local_penalty_solve(sm.miqp, init, options, [&](const VectorXd& v) {
        if (!sm.miqp.feasible(v, 0.0)) return false;
        Plan cand = apply_sequence_solution(plan, sm, goal, ws, v);
        if (!replay_plan(cand, goal, ws).ok) return false;
        found = std::move(cand);
        return true;
      });
  out.restarts_tried = r.restarts_tried;
  out.iterations = r.iterations;
  out.plan = std::move(found);
  return out;
}

// ---------------------------------------------------------------------------
// Multi-bound tree search

struct MbtsOptions {
  double exploration_c = 1.0;
  std::int64_t node_budget = 5000;
  // Wall-clock cap in seconds; 0 disables it.
  double seconds = 0.0;
  // Nodes deeper than this are not expanded; 0 selects 3 N + 3.
  int max_depth = 0;
  // Value per meter of accumulated end-effector travel.
  double travel_weight = 0.1;
  double goal_bonus = 1.0;
  MiqpOptions miqp;
};

/// Exploration constants of the three named settings: 0 greedy, 1 medium,
/// 2 lazy.
inline double mbts_exploration(int level) {
  static constexpr double kC[3] = {0.1, 1.0, 10.0};
  return kC[std::clamp(level, 0, 2)];
}

struct MbtsResult {
  bool solved = false;
  bool timed_out = false;
  Plan plan;
  std::int64_t nodes_visited = 0;
  std::int64_t iterations = 0;
};

namespace detail {

struct MctsNode {
  WorldState world;
  SymbolicState symbolic;
  int parent = -1;
  Action action;
  Vec2 keyframe = Vec2::Zero();
  double travel = 0.0;  // accumulated end-effector travel from the root
  Vec2 ee = Vec2::Zero();
  int depth = 0;
  std::vector<Action> untried;
  std::vector<int> children;
  std::int64_t visits = 0;
  double value_sum = 0.0;
  bool exhausted = false;
};

// Fraction of the goal stack in place, plus up to half a block for how close
// the next one is to being graspable.
inline double goal_progress(const SymbolicState& s, const SymbolicTarget& t,
                            const GoalSpec& goal) {
  const std::size_t n = goal.stack.size();
  if (n == 0) return 1.0;
  const std::size_t k = satisfied_prefix(s, t);
  double p = static_cast<double>(k) / static_cast<double>(n);
  if (k < n) {
    const BlockId& next = goal.stack[k];
    int blockers = s.is_reachable(next) ? 0 : 1;
    for (auto up = s.above(next); up; up = s.above(*up)) ++blockers;
    if (auto it = s.near_taller.find(next); it != s.near_taller.end()) {
      blockers += static_cast<int>(it->second.size());
    }
    p += 0.5 / static_cast<double>(n) / (1.0 + blockers);
  }
  return p;
}

// UCB child of `node` among children not yet exhausted; -1 if none. With
// c = 0 this is the child with the highest mean value.
inline int ucb_select(const std::vector<MctsNode>& tree, int node, double c) {
  const MctsNode& nd = tree[static_cast<std::size_t>(node)];
  int best = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  const double log_n = std::log(static_cast<double>(std::max<std::int64_t>(1, nd.visits)));
  for (int i : nd.children) {
    const MctsNode& ch = tree[static_cast<std::size_t>(i)];
    if (ch.exhausted) continue;
    const double visits = static_cast<double>(std::max<std::int64_t>(1, ch.visits));
    const double score = ch.value_sum / visits + c * std::sqrt(log_n / visits);
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

// Single-step placement bound for `a` in `w`; nullopt if infeasible.
inline std::optional<Vec2> pose_bound(const WorldState& w, const Workspace& ws,
                                      const GoalSpec& goal, const Action& a,
                                      const MiqpOptions& miqp, std::int64_t& nodes) {
  if (a.target == TargetKind::kGoalSlot) {
    if (!goal.has_slot()) return std::nullopt;
    if (w.stack_at(goal.target, 1e-6).empty()) {
      for (const Block& o : w.blocks()) {
        if (o.below || o.id == a.block) continue;
        if (point_in_footprint(o.pose, goal.target, ws.collision_margin)) {
          return std::nullopt;
        }
      }
    }
    return goal.target;
  }
  // Same keep-outs as DTS, with the unfinished goal blocks as pending.
  auto keepouts = placement_keepouts(w, ws, goal, a.block,
                                     pending_blocks(w, ws, goal, {}));
  auto solve = [&](const std::vector<KeepOut>& k) {
    const MiqpModel m =
        a.kind == ActionKind::kToolPull
            ? build_pull_model(w, ws, a.block, k)
            : build_placement_model(w, ws, a, k, w.at(a.block).pose.center());
    const MiqpResult r = branch_and_bound(m, miqp);
    nodes += r.nodes_expanded;
    return r;
  };
  MiqpResult r = solve(keepouts);
  if (!r.optimal() && keepouts.size() > 1) {
    keepouts.resize(goal.has_slot() ? 1 : 0);
    r = solve(keepouts);
  }
  if (!r.optimal()) return std::nullopt;
  return Vec2(r.u(0), r.u(1));
}

}  // namespace detail

/// Forward UCB tree search from `world0`. Every expansion evaluates one new
/// child with the placement bound and counts as a visited node. Returns the
/// first goal-reaching branch, or a timeout with the node statistics.
inline MbtsResult mbts_solve(const WorldState& world0, const GoalSpec& goal,
                             const Workspace& ws, const MbtsOptions& options = {}) {
  if (options.exploration_c < 0.0) {
    throw PlanningError(ErrorCode::kInvalidInput, "exploration constant must be >= 0");
  }
  for (const BlockId& id : goal.stack) world0.at(id);
  const auto start = std::chrono::steady_clock::now();
  const SymbolicTarget target = ground(goal);
  const std::optional<Vec2> slot = slot_of(goal);
  const int max_depth = options.max_depth > 0
                            ? options.max_depth
                            : 3 * static_cast<int>(world0.size()) + 3;

  MbtsResult res;
  std::int64_t miqp_nodes = 0;
  std::vector<detail::MctsNode> tree;
  {
    detail::MctsNode root;
    root.world = world0;
    root.symbolic = abstract(world0, ws, slot);
    root.untried = applicable_actions(root.symbolic);
    root.ee = home_position(ws);
    tree.push_back(std::move(root));
  }

  auto finish = [&](int leaf) {
    std::vector<int> path;
    for (int i = leaf; i > 0; i = tree[static_cast<std::size_t>(i)].parent) path.push_back(i);
    std::reverse(path.begin(), path.end());
    Plan& plan = res.plan;
    plan.worlds.push_back(world0);
    for (int i : path) {
      const detail::MctsNode& nd = tree[static_cast<std::size_t>(i)];
      plan.skeleton.push_back(nd.action);
      plan.keyframes.push_back(nd.keyframe);
      plan.worlds.push_back(nd.world);
    }
    plan.makespan = static_cast<int>(plan.skeleton.size());
    plan.ee_displacement = plan_displacement(plan, ws);
    plan.nodes_visited = res.nodes_visited;
    plan.miqp_nodes = miqp_nodes;
    res.solved = true;
  };

  if (goal_satisfied(world0, goal)) {
    finish(0);
    return res;
  }

  while (true) {
    if (tree[0].exhausted) break;
    if (res.nodes_visited >= options.node_budget) {
      res.timed_out = true;
      break;
    }
    if (options.seconds > 0.0 &&
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() >
            options.seconds) {
      res.timed_out = true;
      break;
    }
    ++res.iterations;

    // Selection.
    int cur = 0;
    while (tree[static_cast<std::size_t>(cur)].untried.empty()) {
      const int best = detail::ucb_select(tree, cur, options.exploration_c);
      if (best < 0) {
        tree[static_cast<std::size_t>(cur)].exhausted = true;
        break;
      }
      cur = best;
    }
    if (tree[static_cast<std::size_t>(cur)].exhausted) continue;

    // Expansion: one untried action, scored by the placement bound.
    detail::MctsNode& parent = tree[static_cast<std::size_t>(cur)];
    const Action a = parent.untried.front();
    parent.untried.erase(parent.untried.begin());
    ++res.nodes_visited;
    const std::optional<Vec2> u =
        detail::pose_bound(parent.world, ws, goal, a, options.miqp, miqp_nodes);
    if (!u) continue;

    detail::MctsNode child;
    child.parent = cur;
    child.action = a;
    child.keyframe = *u;
    child.depth = parent.depth + 1;
    child.world = parent.world;
    const Vec2 pick = child.world.at(a.block).pose.center();
    child.travel = parent.travel + (pick - parent.ee).norm() + (*u - pick).norm();
    child.ee = *u;
    apply_action(child.world, goal, a, *u);
    child.symbolic = abstract(child.world, ws, slot);
    const bool reached = goal_satisfied(child.world, goal);
    if (!reached && child.depth < max_depth) {
      child.untried = applicable_actions(child.symbolic);
    }
    double value = detail::goal_progress(child.symbolic, target, goal) -
                   options.travel_weight * child.travel;
    if (reached) value += options.goal_bonus;
    const int idx = static_cast<int>(tree.size());
    tree[static_cast<std::size_t>(cur)].children.push_back(idx);
    tree.push_back(std::move(child));
    if (reached) {
      finish(idx);
      return res;
    }
    if (tree.back().untried.empty()) tree.back().exhausted = true;

    // Backpropagation.
    for (int i = idx; i >= 0; i = tree[static_cast<std::size_t>(i)].parent) {
      detail::MctsNode& nd = tree[static_cast<std::size_t>(i)];
      ++nd.visits;
      nd.value_sum += value;
    }
  }
  res.plan.nodes_visited = res.nodes_visited;
  res.plan.miqp_nodes = miqp_nodes;
  return res;
}

}  // namespace dlgp
