#include "dlgp/sim.hpp"

#include <gtest/gtest.h>

#include "dlgp/bench/instance.hpp"
#include "dlgp/io.hpp"
#include "fixtures.hpp"

namespace dlgp {
namespace {

using testing::block_at;
using testing::block_on;

// Point-sampling overlap oracle: some interior sample of one footprint lies
// strictly inside the other.
bool sampled_overlap(const BlockPose& a, const BlockPose& b) {
  for (const auto& [p, q] : {std::pair{&a, &b}, std::pair{&b, &a}}) {
    const Mat2 r = rotation_matrix(p->theta);
    const int n = 60;
    for (int i = 1; i < n; ++i) {
      for (int j = 1; j < n; ++j) {
        const Vec2 local((i / double(n) - 0.5) * p->size_l, (j / double(n) - 0.5) * p->size_l);
        const Vec2 w = p->center() + r * local;
        const Vec2 in_q = rotation_matrix(q->theta).transpose() * (w - q->center());
        if (std::abs(in_q.x()) < q->size_l / 2 && std::abs(in_q.y()) < q->size_l / 2) {
          return true;
        }
      }
    }
  }
  return false;
}

void expect_physical(const WorldState& w) {
  const auto bases = w.on_table();
  for (std::size_t i = 0; i < bases.size(); ++i) {
    for (std::size_t j = i + 1; j < bases.size(); ++j) {
      EXPECT_FALSE(sampled_overlap(w.at(bases[i]).pose, w.at(bases[j]).pose))
          << bases[i] << " / " << bases[j];
    }
  }
  for (const Block& b : w.blocks()) {
    if (b.below) {
      EXPECT_TRUE(w.contains(*b.below));
      EXPECT_EQ(b.pose.center(), w.at(*b.below).pose.center());
    }
  }
}

Workspace big_table() {
  Workspace ws;
  ws.table = TableBounds{-1.1, 1.1, -1.1, 1.1};
  return ws;
}

Scenario load(const std::string& name) {
  return io::load_scenario(std::string(DLGP_DATA_DIR) + "/scenarios/" + name);
}

TEST(Overlap, SeparatingAxesAgreeWithSampling) {
  Sampler rng(4);
  for (int i = 0; i < 300; ++i) {
    const BlockPose a{0.0, 0.0, rng.uniform(-3, 3), 0.05, 0.05};
    const BlockPose b{rng.uniform(-0.08, 0.08), rng.uniform(-0.08, 0.08),
                      rng.uniform(-3, 3), 0.05, 0.05};
    // Sampling misses slivers thinner than its grid step.
    if (footprints_overlap(a, b, 2e-3) || !footprints_overlap(a, b, -2e-3)) {
      EXPECT_EQ(footprints_overlap(a, b), sampled_overlap(a, b));
    }
  }
}

TEST(Disturbance, DisplaceByZeroIsIdentity) {
  const testing::BuriedBase f;
  DisturbanceParams p;
  p.block = "B";
  EXPECT_EQ(inject_disturbance(f.world, f.ws, DisturbanceKind::kDisplace, p, 1), f.world);
}

TEST(Disturbance, DisplaceMovesTheWholeStack) {
  const testing::BuriedBase f;
  DisturbanceParams p;
  p.block = "B";
  p.delta = Vec2(0.0, 0.1);
  const WorldState w = inject_disturbance(f.world, f.ws, DisturbanceKind::kDisplace, p, 1);
  EXPECT_NEAR(w.at("C").pose.y, 0.25, 1e-12);
  EXPECT_NEAR(w.at("B").pose.y, 0.25, 1e-12);
  EXPECT_EQ(w.at("B").below, "C");
  p.delta = Vec2(-0.3, 0.0);  // onto A
  EXPECT_THROW(inject_disturbance(f.world, f.ws, DisturbanceKind::kDisplace, p, 1),
               PlanningError);
}

TEST(Disturbance, PushOutOfReach) {
  const Workspace ws = big_table();
  const WorldState w0({block_at("A", 0.3, 0.1), block_at("B", 0.5, 0.2)});
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    DisturbanceParams p;
    p.block = "A";
    const WorldState w = inject_disturbance(w0, ws, DisturbanceKind::kPushOutOfReach, p, seed);
    EXPECT_GT((w.at("A").pose.center() - ws.reach.center).norm(), ws.reach.radius);
    EXPECT_FALSE(is_reachable(ws, w.at("A")));
    expect_physical(w);
  }
  // The default table lies inside reach.
  DisturbanceParams p;
  p.block = "A";
  EXPECT_THROW(inject_disturbance(w0, Workspace{}, DisturbanceKind::kPushOutOfReach, p, 0),
               PlanningError);
}

TEST(Disturbance, ToppleThreeStack) {
  const Block a = block_at("A", 0.0, 0.0);
  const Block b = block_on("B", a);
  const Block c = block_on("C", b);
  const WorldState w0({a, b, c, block_at("D", 0.1, 0.0)});
  const Workspace ws;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    DisturbanceParams p;
    p.block = "B";
    const WorldState w = inject_disturbance(w0, ws, DisturbanceKind::kTopple, p, seed);
    EXPECT_EQ(w.on_table().size(), 4u);
    expect_physical(w);
  }
}

TEST(Disturbance, ShuffleChangesTheOrder) {
  const Block a = block_at("A", 0.0, 0.0);
  const Block b = block_on("B", a);
  const Block c = block_on("C", b);
  const WorldState w0({a, b, c});
  DisturbanceParams p;
  p.block = "C";
  const WorldState w = inject_disturbance(w0, Workspace{}, DisturbanceKind::kShuffleStack, p, 2);
  const auto bases = w.on_table();
  ASSERT_EQ(bases.size(), 1u);
  EXPECT_NE(w.stack_from(bases[0]), (std::vector<BlockId>{"A", "B", "C"}));
  EXPECT_EQ(w.at(bases[0]).pose.center(), Vec2(0.0, 0.0));
  expect_physical(w);
}

TEST(Disturbance, InapplicableCases) {
  const WorldState w({block_at("A", 0.0, 0.0)});
  DisturbanceParams p;
  p.block = "A";
  for (DisturbanceKind k : {DisturbanceKind::kShuffleStack, DisturbanceKind::kTopple}) {
    try {
      inject_disturbance(w, Workspace{}, k, p, 0);
      FAIL();
    } catch (const PlanningError& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInapplicableDisturbance);
    }
  }
  p.block = "Z";
  EXPECT_THROW(inject_disturbance(w, Workspace{}, DisturbanceKind::kDisplace, p, 0),
               PlanningError);
}

TEST(ClosedLoop, OpenLoopEqualsClosedLoop) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const bench::Instance inst = bench::gen_instance(bench::Domain::kTower, 4, seed);
    Scenario sc;
    sc.world0 = inst.world0;
    sc.goal = inst.goal;
    sc.ws = inst.ws;
    PlannerConfig cfg;
    cfg.ws = inst.ws;
    const Plan plan = dts_solve(inst.world0, inst.goal, cfg);
    const Trace t = closed_loop_run(sc);
    ASSERT_TRUE(t.success) << t.reason;
    EXPECT_EQ(t.replan_count, plan.makespan);
    ASSERT_EQ(t.steps.size(), plan.skeleton.size());
    for (std::size_t k = 0; k < t.steps.size(); ++k) {
      EXPECT_EQ(t.steps[k].executed, plan.skeleton[k]);
      EXPECT_EQ(t.steps[k].keyframe, plan.keyframes[k]);
      EXPECT_EQ(t.steps[k].observed, plan.worlds[k]);
    }
    EXPECT_TRUE(goal_satisfied(t.final_world, inst.goal));
  }
}

TEST(ClosedLoop, ToolPullScenarioPullsCBackIntoReach) {
  const Scenario sc = load("tool_pull_recovery.json");
  const Trace t = closed_loop_run(sc);
  ASSERT_TRUE(t.success) << t.reason;
  ASSERT_GE(t.steps.size(), 2u);
  EXPECT_EQ(t.steps[0].executed, Action::pick_place("D", TargetKind::kGoalSlot));
  ASSERT_TRUE(t.steps[0].disturbance.has_value());
  int pulls = 0;
  for (const Action& a : t.steps[1].plan.skeleton) pulls += a.kind == ActionKind::kToolPull;
  EXPECT_EQ(pulls, 1);
  EXPECT_EQ(t.steps[1].executed, Action::tool_pull("C"));
  EXPECT_TRUE(goal_satisfied(t.final_world, sc.goal));

  const std::string first = io::trace_jsonl(t);
  const std::string second = io::trace_jsonl(closed_loop_run(load("tool_pull_recovery.json")));
  EXPECT_EQ(first, second);
}

TEST(ClosedLoop, StackShuffleIsRepaired) {
  const Scenario sc = load("stack_shuffle.json");
  const Trace t = closed_loop_run(sc);
  ASSERT_TRUE(t.success) << t.reason;
  bool disturbed = false;
  for (const TraceStep& s : t.steps) disturbed = disturbed || s.disturbance.has_value();
  EXPECT_TRUE(disturbed);
  const BlockId base = t.final_world.base_of(sc.goal.stack.front());
  EXPECT_EQ(t.final_world.stack_from(base), sc.goal.stack);
  expect_physical(t.final_world);
}

TEST(ClosedLoop, NoisyObservationsStillFinish) {
  const bench::Instance inst = bench::gen_instance(bench::Domain::kTower, 4, 2);
  Scenario sc;
  sc.world0 = inst.world0;
  sc.goal = inst.goal;
  sc.ws = inst.ws;
  sc.noise_stddev = 0.002;
  sc.seed = 9;
  const Trace a = closed_loop_run(sc);
  EXPECT_TRUE(a.success) << a.reason;
  EXPECT_EQ(io::trace_jsonl(a), io::trace_jsonl(closed_loop_run(sc)));
}

TEST(ClosedLoop, ReplanCapIsAFailure) {
  Scenario sc;
  const testing::BuriedBase f;
  sc.world0 = f.world;
  sc.goal = f.goal;
  sc.ws = f.ws;
  sc.max_replans = 2;
  const Trace t = closed_loop_run(sc);
  EXPECT_FALSE(t.success);
  EXPECT_EQ(t.reason, "MaxReplansExceeded");
  EXPECT_EQ(t.replan_count, 2);
}

TEST(ClosedLoop, RejectsBadSchedules) {
  Scenario sc;
  const testing::BuriedBase f;
  sc.world0 = f.world;
  sc.goal = f.goal;
  Disturbance d;
  d.params.block = "A";
  d.after_action = 2;
  sc.disturbances = {d, d};
  EXPECT_THROW(closed_loop_run(sc), PlanningError);
  sc.disturbances.clear();
  sc.noise_stddev = -1.0;
  EXPECT_THROW(closed_loop_run(sc), PlanningError);
}

}  // namespace
}  // namespace dlgp
