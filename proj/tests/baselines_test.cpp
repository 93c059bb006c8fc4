#include "dlgp/baselines.hpp"

#include <gtest/gtest.h>

#include "dlgp/bench/instance.hpp"
#include "fixtures.hpp"

namespace dlgp {
namespace {

using testing::block_at;

// ---------------------------------------------------------------------------
// MBTS

TEST(Mbts, OneActionInstanceSolvesInTheFirstLayer) {
  const WorldState w({block_at("A", 0.2, 0.1), block_at("B", -0.2, 0.1)});
  GoalSpec goal;
  goal.stack = {"A"};
  goal.target = Vec2(0.0, -0.25);
  const Workspace ws;
  const std::size_t first_layer = applicable_actions(abstract(w, ws, goal.target)).size();
  for (int level = 0; level < 3; ++level) {
    MbtsOptions opt;
    opt.exploration_c = mbts_exploration(level);
    const MbtsResult r = mbts_solve(w, goal, ws, opt);
    ASSERT_TRUE(r.solved);
    EXPECT_LE(r.nodes_visited, static_cast<std::int64_t>(first_layer));
    EXPECT_EQ(r.plan.makespan, 1);
    EXPECT_TRUE(replay_plan(r.plan, goal, ws).ok);
  }
}

TEST(Mbts, SatisfiedGoalNeedsNoNodes) {
  const WorldState w({block_at("A", 0.0, -0.25)});
  GoalSpec goal;
  goal.stack = {"A"};
  goal.target = Vec2(0.0, -0.25);
  const MbtsResult r = mbts_solve(w, goal, Workspace{});
  EXPECT_TRUE(r.solved);
  EXPECT_EQ(r.nodes_visited, 0);
  EXPECT_EQ(r.plan.makespan, 0);
}

TEST(Mbts, RejectsNegativeExploration) {
  const testing::BuriedBase f;
  MbtsOptions opt;
  opt.exploration_c = -0.5;
  try {
    mbts_solve(f.world, f.goal, f.ws, opt);
    FAIL();
  } catch (const PlanningError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidInput);
  }
}

TEST(Mbts, ZeroExplorationIsGreedy) {
  std::vector<detail::MctsNode> tree(4);
  tree[0].children = {1, 2, 3};
  tree[0].visits = 1000;
  // Means 0.2, 0.5, 0.4; child 2 has by far the most visits.
  tree[1].visits = 1;
  tree[1].value_sum = 0.2;
  tree[2].visits = 900;
  tree[2].value_sum = 450.0;
  tree[3].visits = 99;
  tree[3].value_sum = 39.6;
  EXPECT_EQ(detail::ucb_select(tree, 0, 0.0), 2);
  // Exploration pulls towards the rarely visited child.
  EXPECT_EQ(detail::ucb_select(tree, 0, 10.0), 1);
  tree[2].exhausted = true;
  EXPECT_EQ(detail::ucb_select(tree, 0, 0.0), 3);
  tree[1].exhausted = tree[3].exhausted = true;
  EXPECT_EQ(detail::ucb_select(tree, 0, 0.0), -1);
}

TEST(Mbts, PlansReplay) {
  const std::vector<std::pair<bench::Domain, int>> cases = {
      {bench::Domain::kOp, 6}, {bench::Domain::kTower, 4}, {bench::Domain::kTowerTool, 4}};
  for (const auto& [domain, x] : cases) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const bench::Instance inst = bench::gen_instance(domain, x, seed);
      SCOPED_TRACE(inst.id());
      MbtsOptions opt;
      opt.exploration_c = mbts_exploration(0);
      const MbtsResult r = mbts_solve(inst.world0, inst.goal, inst.ws, opt);
      if (!r.solved) continue;
      const ReplayReport rep = replay_plan(r.plan, inst.goal, inst.ws);
      EXPECT_TRUE(rep.ok) << (rep.violations.empty() ? "" : rep.violations[0]);
      EXPECT_EQ(r.plan.nodes_visited, r.nodes_visited);
    }
  }
}

TEST(Mbts, NodeBudgetIsATimeout) {
  const bench::Instance inst = bench::gen_instance(bench::Domain::kTower, 8, 0);
  MbtsOptions opt;
  opt.exploration_c = mbts_exploration(2);
  opt.node_budget = 50;
  const MbtsResult r = mbts_solve(inst.world0, inst.goal, inst.ws, opt);
  EXPECT_FALSE(r.solved);
  EXPECT_TRUE(r.timed_out);
  EXPECT_EQ(r.nodes_visited, 50);
}

// ---------------------------------------------------------------------------
// Local solver

TEST(LocalNlp, PenaltyGradientMatchesFiniteDifferences) {
  const testing::BuriedBase f;
  const Action a = Action::pick_place("B", TargetKind::kFreePlacement);
  const auto keepouts = placement_keepouts(f.world, f.ws, f.goal, "B", {"A", "C"});
  const MiqpModel m = build_placement_model(f.world, f.ws, a, keepouts, Vec2(0.15, 0.15));
  const detail::PenaltyProblem p{&m, 1e-6};
  Sampler rng(1);
  for (int i = 0; i < 50; ++i) {
    VectorXd v(2);
    v << rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3);
    VectorXd g;
    p.value(v, 40.0, &g);
    for (int k = 0; k < 2; ++k) {
      VectorXd e = VectorXd::Zero(2);
      e(k) = 1e-7;
      const double fd = (p.value(v + e, 40.0, nullptr) - p.value(v - e, 40.0, nullptr)) / 2e-7;
      EXPECT_NEAR(g(k), fd, 1e-4 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(LocalNlp, EmptyTableMatchesMiqp) {
  const WorldState w({block_at("A", 0.25, -0.1)});
  const Workspace ws;
  GoalSpec goal;
  goal.stack = {"A"};
  goal.target = Vec2(-0.2, 0.2);
  const Action a = Action::pick_place("A", TargetKind::kFreePlacement);
  // The slot keep-out keeps the instance non-trivial away from the anchor.
  const std::vector<KeepOut> keepouts = placement_keepouts(w, ws, goal, "A", {});
  const Vec2 anchor = w.at("A").pose.center();
  const MiqpResult exact = branch_and_bound(build_placement_model(w, ws, a, keepouts, anchor));
  ASSERT_TRUE(exact.optimal());
  Sampler rng(8);
  for (int i = 0; i < 10; ++i) {
    const Vec2 init(rng.uniform(-0.45, 0.45), rng.uniform(-0.45, 0.45));
    const LocalNlpResult r = local_nlp_place(w, ws, a, keepouts, init);
    ASSERT_TRUE(r.point.has_value());
    EXPECT_NEAR((*r.point - exact.u.head<2>()).norm(), 0.0, 1e-4);
  }
}

TEST(LocalNlp, InsideAnObstacleFindsTheNearestFace) {
  // Anchor inside the inflated footprint of B; the MIQP optimum is on a face.
  const WorldState w({block_at("A", 0.3, 0.3), block_at("B", 0.0, 0.0)});
  const Workspace ws;
  GoalSpec goal;
  goal.stack = {"A"};
  goal.target = Vec2(-0.3, -0.3);
  const Action a = Action::pick_place("A", TargetKind::kFreePlacement);
  MiqpModel m = build_placement_model(w, ws, a, {}, Vec2(0.01, 0.005));
  const MiqpResult exact = branch_and_bound(m);
  ASSERT_TRUE(exact.optimal());
  LocalNlpOptions opt;
  const PenaltySolveResult r = local_penalty_solve(m, Vec2(0.01, 0.005), opt,
                                                   [&](const VectorXd& v) { return m.feasible(v, 0.0); });
  ASSERT_TRUE(r.v.has_value());
  EXPECT_NEAR(m.objective.objective(*r.v), exact.objective, 1e-4);
}

TEST(LocalNlp, NeverReportsAnInfeasiblePoint) {
  // Returned points go through exact replay when used as the DTS placer.
  for (int x : {3, 6, 9}) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const bench::Instance inst = bench::gen_instance(bench::Domain::kOp, x, seed);
      SCOPED_TRACE(inst.id());
      PlannerConfig cfg;
      cfg.ws = inst.ws;
      LocalNlpOptions lo;
      lo.seed = seed;
      cfg.free_placer = make_local_placer(lo);
      try {
        const Plan p = dts_solve(inst.world0, inst.goal, cfg);
        const ReplayReport rep = replay_plan(p, inst.goal, inst.ws);
        EXPECT_TRUE(rep.ok) << (rep.violations.empty() ? "" : rep.violations[0]);
      } catch (const PlanningError& e) {
        EXPECT_EQ(e.code(), ErrorCode::kInfeasible);
      }
    }
  }
}

TEST(LocalNlp, Op3SucceedsFromTheAnchor) {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    const bench::Instance inst = bench::gen_instance(bench::Domain::kOp, 3, seed);
    PlannerConfig cfg;
    cfg.ws = inst.ws;
    cfg.free_placer = make_local_placer();
    const Plan p = dts_solve(inst.world0, inst.goal, cfg);
    EXPECT_TRUE(replay_plan(p, inst.goal, inst.ws).ok) << inst.id();
  }
}

TEST(LocalNlp, SequenceSolveIsExactlyFeasibleWhenItSucceeds) {
  const testing::BuriedBase f;
  PlannerConfig cfg;
  cfg.ws = f.ws;
  const Plan p = dts_solve(f.world, f.goal, cfg);
  const LocalSequenceResult r = local_nlp_sequence(p, f.world, f.goal, f.ws);
  ASSERT_TRUE(r.plan.has_value());
  EXPECT_TRUE(replay_plan(*r.plan, f.goal, f.ws).ok);
  EXPECT_EQ(r.plan->skeleton, p.skeleton);
}

}  // namespace
}  // namespace dlgp
