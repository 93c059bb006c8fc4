// Builds a three-block tower when the bottom block is buried under another
// one, then re-optimizes the free placements jointly.

#include <cstdio>

#include "dlgp/fullopt.hpp"
#include "dlgp/planner.hpp"

using namespace dlgp;

namespace {

Block block(const char* id, double x, double y) {
  Block b;
  b.id = id;
  b.pose = BlockPose{x, y, 0.0, 0.05, 0.05};
  return b;
}

void print_plan(const char* title, const Plan& p) {
  std::printf("%s: %d actions, %.3f m of end-effector travel\n", title, p.makespan,
              p.ee_displacement);
  for (std::size_t k = 0; k < p.skeleton.size(); ++k) {
    const Action& a = p.skeleton[k];
    std::printf("  %zu. %-10s %s -> %-14s (%+.3f, %+.3f)\n", k + 1, to_string(a.kind),
                a.block.c_str(), to_string(a.target), p.keyframes[k].x(), p.keyframes[k].y());
  }
}

}  // namespace

int main() {
  const Block c = block("C", 0.15, 0.15);
  Block b = c;
  b.id = "B";
  b.below = "C";
  const Block a = block("A", -0.15, 0.15);
  const WorldState world({a, b, c});

  GoalSpec goal;
  goal.stack = {"C", "B", "A"};
  goal.target = Vec2(0.0, -0.2);

  PlannerConfig cfg;
  const Plan plan = dts_solve(world, goal, cfg);
  print_plan("tree search", plan);

  const Plan refined = optimize_full(plan, world, goal, cfg.ws);
  print_plan("joint refinement", refined);

  const ReplayReport rep = replay_plan(refined, goal, cfg.ws);
  std::printf("replay: %s\n", rep.ok ? "ok" : rep.violations.front().c_str());
  return rep.ok ? 0 : 1;
}
