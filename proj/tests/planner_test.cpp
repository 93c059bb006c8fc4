#include "dlgp/planner.hpp"

#include <gtest/gtest.h>

#include "fixtures.hpp"

namespace dlgp {
namespace {

using testing::block_at;
using testing::block_on;

const Action kPickCSlot = Action::pick_place("C", TargetKind::kGoalSlot);
const Action kPickBFree = Action::pick_place("B", TargetKind::kFreePlacement);

TEST(SubGoal, BuriedBaseRelocatesB) {
  const testing::BuriedBase f;
  const GoalSpec g = sub_goal(f.world, f.ws, f.goal, kPickCSlot);
  EXPECT_EQ(g.kind, GoalKind::kRelocate);
  EXPECT_EQ(g.block, "B");
}

TEST(SubGoal, OutOfReachAsksForPull) {
  Workspace ws;
  ws.table = TableBounds{-1.5, 1.5, -1.5, 1.5};
  const WorldState w({block_at("C", 1.2, 0.0)});
  GoalSpec goal;
  goal.stack = {"C"};
  const GoalSpec g =
      sub_goal(w, ws, goal, Action::pick_place("C", TargetKind::kGoalSlot));
  EXPECT_EQ(g.kind, GoalKind::kBringIntoReach);
  EXPECT_EQ(succ_dagger(abstract(w, ws), ground(g)), Action::tool_pull("C"));
}

TEST(SubGoal, TopmostOfStackedObstructorsFirst) {
  const Block a = block_at("A", 0.1, 0.1);
  const Block b = block_on("B", a);
  const Block c = block_on("C", b);
  const WorldState w({a, b, c});
  GoalSpec goal;
  goal.stack = {"A"};
  goal.target = Vec2(-0.2, -0.2);
  const GoalSpec g =
      sub_goal(w, Workspace{}, goal, Action::pick_place("A", TargetKind::kGoalSlot));
  EXPECT_EQ(g.block, "C");
}

TEST(SubGoal, FeasibleActionHasNoConflict) {
  const testing::BuriedBase f;
  try {
    sub_goal(f.world, f.ws, f.goal, kPickBFree);
    FAIL();
  } catch (const PlanningError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoConflict);
  }
}

TEST(TaskGraph, BuriedBaseStacks) {
  const testing::BuriedBase f;
  const TaskGraphResult tg = task_graph(f.world, f.goal, f.ws);
  ASSERT_EQ(tg.actions.size(), 2u);
  EXPECT_EQ(tg.actions[0], kPickCSlot);
  EXPECT_EQ(tg.actions[1], kPickBFree);
  EXPECT_EQ(tg.subgoals.size(), tg.actions.size());
  EXPECT_EQ(tg.subgoals[1].kind, GoalKind::kRelocate);
}

TEST(TaskGraph, FeasibleGoalGivesSingleAction) {
  const WorldState w({block_at("A", 0.1, 0.1)});
  GoalSpec goal;
  goal.stack = {"A"};
  goal.target = Vec2(-0.2, 0.0);
  const TaskGraphResult tg = task_graph(w, goal, Workspace{});
  ASSERT_EQ(tg.actions.size(), 1u);
  EXPECT_EQ(tg.actions[0], Action::pick_place("A", TargetKind::kGoalSlot));
}

// Target T, obstructed by O1, itself obstructed by O2, itself by O3.
WorldState obstruction_chain() {
  return WorldState({block_at("T", 0.0, 0.0, 0.05), block_at("O1", 0.09, 0.0, 0.07),
                     block_at("O2", 0.18, 0.0, 0.09), block_at("O3", 0.27, 0.0, 0.11)});
}

TEST(TaskGraph, ObstructionChainFourDeep) {
  GoalSpec goal;
  goal.kind = GoalKind::kSinglePick;
  goal.stack = {"T"};
  goal.target = Vec2(-0.3, -0.3);
  const TaskGraphResult tg = task_graph(obstruction_chain(), goal, Workspace{});
  ASSERT_EQ(tg.actions.size(), 4u);
  EXPECT_EQ(tg.actions[0].block, "T");
  EXPECT_EQ(tg.actions[1].block, "O1");
  EXPECT_EQ(tg.actions[2].block, "O2");
  EXPECT_EQ(tg.actions[3].block, "O3");
}

TEST(Dts, BuriedBasePlan) {
  const testing::BuriedBase f;
  PlannerConfig cfg;
  cfg.ws = f.ws;
  const Plan plan = dts_solve(f.world, f.goal, cfg);
  const std::vector<Action> expected{
      kPickBFree, kPickCSlot, Action::pick_place("B", TargetKind::kGoalSlot),
      Action::pick_place("A", TargetKind::kGoalSlot)};
  EXPECT_EQ(plan.skeleton, expected);
  EXPECT_EQ(plan.makespan, 4);
  EXPECT_EQ(plan.nodes_visited, 4);
  EXPECT_EQ(plan.worlds.size(), 5u);
  EXPECT_TRUE(goal_satisfied(plan.worlds.back(), f.goal));
  const ReplayReport rep = replay_plan(plan, f.goal, f.ws);
  EXPECT_TRUE(rep.ok) << (rep.violations.empty() ? "" : rep.violations[0]);
  // The parking spot stays off the goal slot.
  const BlockPose slot{f.goal.target.x(), f.goal.target.y(), 0.0, 0.05, 0.05};
  EXPECT_FALSE(point_in_footprint(slot, plan.keyframes[0], f.ws.collision_margin));
}

TEST(Dts, AlreadyAtGoal) {
  const WorldState w({block_at("A", -0.2, 0.0)});
  GoalSpec goal;
  goal.stack = {"A"};
  goal.target = Vec2(-0.2, 0.0);
  const Plan plan = dts_solve(w, goal);
  EXPECT_EQ(plan.makespan, 0);
  EXPECT_TRUE(plan.skeleton.empty());
  EXPECT_EQ(plan.worlds.size(), 1u);
  EXPECT_TRUE(replay_plan(plan, goal, Workspace{}).ok);
}

TEST(Dts, ObstructionChainRelocatesEachOnce) {
  GoalSpec goal;
  goal.kind = GoalKind::kSinglePick;
  goal.stack = {"T"};
  goal.target = Vec2(-0.3, -0.3);
  const Plan plan = dts_solve(obstruction_chain(), goal);
  ASSERT_EQ(plan.makespan, 4);
  EXPECT_EQ(plan.skeleton[0].block, "O3");
  EXPECT_EQ(plan.skeleton[3].block, "T");
  EXPECT_EQ(plan.nodes_visited, 4);
  EXPECT_TRUE(replay_plan(plan, goal, Workspace{}).ok);
}

TEST(Dts, PullsUnreachableBlock) {
  Workspace ws;
  ws.table = TableBounds{-1.2, 1.2, -1.2, 1.2};
  const WorldState w({block_at("A", 0.0, 0.0), block_at("B", 1.0, 0.3)});
  GoalSpec goal;
  goal.stack = {"A", "B"};
  goal.target = Vec2(0.0, -0.3);
  PlannerConfig cfg;
  cfg.ws = ws;
  const Plan plan = dts_solve(w, goal, cfg);
  ASSERT_EQ(plan.makespan, 3);
  int pulls = 0;
  for (const Action& a : plan.skeleton) pulls += a.kind == ActionKind::kToolPull;
  EXPECT_EQ(pulls, 1);
  EXPECT_TRUE(replay_plan(plan, goal, ws).ok);
}

TEST(Dts, EnclosedTargetWithNowhereToParkIsInfeasible) {
  // Table just large enough for the two blocks and the slot.
  Workspace ws;
  ws.table = TableBounds{-0.1, 0.1, -0.05, 0.05};
  const Block a = block_at("A", -0.05, 0.0);
  const WorldState w({a, block_on("B", a), block_at("C", 0.05, 0.0)});
  GoalSpec goal;
  goal.stack = {"A"};
  goal.target = Vec2(0.05, 0.0);
  PlannerConfig cfg;
  cfg.ws = ws;
  try {
    dts_solve(w, goal, cfg);
    FAIL();
  } catch (const PlanningError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInfeasible);
  }
}

TEST(Replay, DetectsTamperedKeyframe) {
  const testing::BuriedBase f;
  Plan plan = dts_solve(f.world, f.goal);
  plan.keyframes[0] = f.world.at("A").pose.center();
  EXPECT_FALSE(replay_plan(plan, f.goal, f.ws).ok);
}

TEST(DtsProperties, NoRemovableAction) {
  const testing::BuriedBase f;
  const Plan plan = dts_solve(f.world, f.goal);
  for (std::size_t drop = 0; drop < plan.skeleton.size(); ++drop) {
    WorldState w = plan.worlds.front();
    bool ok = true;
    for (std::size_t k = 0; k < plan.skeleton.size() && ok; ++k) {
      if (k == drop) continue;
      const SymbolicState s = abstract(w, f.ws, f.goal.target);
      if (violated_precondition(s, plan.skeleton[k])) ok = false;
      else apply_action(w, f.goal, plan.skeleton[k], plan.keyframes[k]);
    }
    EXPECT_FALSE(ok && goal_satisfied(w, f.goal)) << "action " << drop;
  }
}

TEST(DtsProperties, Deterministic) {
  const testing::BuriedBase f;
  const Plan a = dts_solve(f.world, f.goal);
  const Plan b = dts_solve(f.world, f.goal);
  EXPECT_EQ(a.skeleton, b.skeleton);
  EXPECT_EQ(a.keyframes, b.keyframes);
  EXPECT_EQ(a.ee_displacement, b.ee_displacement);
}

}  // namespace
}  // namespace dlgp
