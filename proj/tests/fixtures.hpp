#pragma once

#include "dlgp/world.hpp"

namespace dlgp::testing {

inline Block block_at(const BlockId& id, double x, double y,
                      double height = 0.05) {
  Block b;
  b.id = id;
  b.pose = BlockPose{x, y, 0.0, height, 0.05};
  return b;
}

inline Block block_on(const BlockId& id, const Block& support,
                      double height = 0.05) {
  Block b = support;
  b.id = id;
  b.pose.height = height;
  b.below = support.id;
  return b;
}

// Three blocks: B stacked on C, A alone; the goal tower is C, B, A at #p3.
struct BuriedBase {
  WorldState world;
  GoalSpec goal;
  Workspace ws;

  BuriedBase() {
    const Block c = block_at("C", 0.15, 0.15);
    const Block b = block_on("B", c);
    const Block a = block_at("A", -0.15, 0.15);
    world = WorldState({a, b, c});
    goal.kind = GoalKind::kStack;
    goal.stack = {"C", "B", "A"};
    goal.target = Vec2(0.0, -0.2);
  }
};

}  // namespace dlgp::testing
