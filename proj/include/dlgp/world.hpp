#pragma once

// Geometric world state: block poses plus the support relation, the table and
// reach parameters, and the goal description shared by every planner.

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "dlgp/errors.hpp"
#include "dlgp/geometry.hpp"

namespace dlgp {

using BlockId = std::string;

struct Block {
  BlockId id;
  BlockPose pose;
  // Block directly underneath; nullopt means resting on the table.
  std::optional<BlockId> below;

  bool operator==(const Block&) const = default;
};

inline bool operator==(const BlockPose& a, const BlockPose& b) {
  return a.x == b.x && a.y == b.y && a.theta == b.theta &&
         a.height == b.height && a.size_l == b.size_l;
}

struct Workspace {
  TableBounds table;
  ReachRegion reach;
  double block_size = 0.05;
  // Inflation of obstacle footprints for placements. l/2 gives a total
  // center offset of l between two equal squares; 0 is the point model.
  double collision_margin = 0.025;
  // A block with a strictly taller block closer than this (edge gap) cannot
  // be grasped.
  double grasp_clearance = 0.075;
  bool obstruction_rule = true;

  double slot_tolerance() const { return 0.25 * block_size; }
  // Big-M for the disjunctive encoding: provably vacuous over the table.
  double big_m() const { return 2.0 * (table.diagonal() + block_size); }
};

enum class GoalKind { kStack, kSinglePick, kRelocate, kBringIntoReach };

inline const char* to_string(GoalKind k) {
  switch (k) {
    case GoalKind::kStack: return "stack";
    case GoalKind::kSinglePick: return "single_pick";
    case GoalKind::kRelocate: return "relocate";
    case GoalKind::kBringIntoReach: return "bring_into_reach";
  }
  return "?";
}

// Goal or subgoal. kStack/kSinglePick use `stack` (bottom first) at `target`;
// kRelocate/kBringIntoReach name a single `block`.
struct GoalSpec {
  GoalKind kind = GoalKind::kStack;
  std::vector<BlockId> stack;
  Vec2 target = Vec2::Zero();
  BlockId block;

  bool has_slot() const {
    return kind == GoalKind::kStack || kind == GoalKind::kSinglePick;
  }
  bool operator==(const GoalSpec& o) const {
    return kind == o.kind && stack == o.stack && target == o.target &&
           block == o.block;
  }
};

class WorldState {
 public:
  WorldState() = default;
  explicit WorldState(std::vector<Block> blocks) : blocks_(std::move(blocks)) {}

  const std::vector<Block>& blocks() const { return blocks_; }
  std::size_t size() const { return blocks_.size(); }
  bool operator==(const WorldState&) const = default;

  bool contains(const BlockId& id) const { return find(id) != nullptr; }

  const Block* find(const BlockId& id) const {
    for (const Block& b : blocks_) {
      if (b.id == id) return &b;
    }
    return nullptr;
  }

  const Block& at(const BlockId& id) const {
    const Block* b = find(id);
    if (!b) throw PlanningError(ErrorCode::kUnknownBlock, id);
    return *b;
  }

  /// Block resting directly on `id`, if any.
  std::optional<BlockId> above(const BlockId& id) const {
    for (const Block& b : blocks_) {
      if (b.below && *b.below == id) return b.id;
    }
    return std::nullopt;
  }

  bool is_stack_top(const BlockId& id) const { return !above(id).has_value(); }

  BlockId base_of(const BlockId& id) const {
    const Block* b = &at(id);
    while (b->below) b = &at(*b->below);
    return b->id;
  }

  /// Bottom-up list of the stack whose base is `base`.
  std::vector<BlockId> stack_from(const BlockId& base) const {
    std::vector<BlockId> out{base};
    for (auto up = above(base); up; up = above(*up)) out.push_back(*up);
    return out;
  }

  BlockId top_of(const BlockId& id) const { return stack_from(id).back(); }

  std::vector<BlockId> on_table() const {
    std::vector<BlockId> out;
    for (const Block& b : blocks_) {
      if (!b.below) out.push_back(b.id);
    }
    return out;
  }

  /// Bottom-up stack standing at `target` (within `tol`), empty if none.
  std::vector<BlockId> stack_at(const Vec2& target, double tol) const {
    for (const Block& b : blocks_) {
      if (!b.below && (b.pose.center() - target).norm() <= tol) {
        return stack_from(b.id);
      }
    }
    return {};
  }

  double elevation(const BlockId& id) const {
    double z = 0.0;
    for (const Block* b = &at(id); b->below; b = &at(*b->below)) {
      z += at(*b->below).pose.height;
    }
    return z;
  }

  // Kinematic updates. The moved block must be a stack top.
  void place_on_table(const BlockId& id, const Vec2& p, double theta = 0.0) {
    Block& b = mutable_at(id);
    b.below.reset();
    b.pose.x = p.x();
    b.pose.y = p.y();
    b.pose.theta = theta;
  }

  void place_on(const BlockId& id, const BlockId& support) {
    const Block& s = at(support);
    const double sx = s.pose.x;
    const double sy = s.pose.y;
    const double st = s.pose.theta;
    Block& b = mutable_at(id);
    b.below = support;
    b.pose.x = sx;
    b.pose.y = sy;
    b.pose.theta = st;
  }

  /// Moves a whole stack rooted at `base` by `delta`.
  void translate_stack(const BlockId& base, const Vec2& delta) {
    for (const BlockId& id : stack_from(base)) {
      Block& b = mutable_at(id);
      b.pose.x += delta.x();
      b.pose.y += delta.y();
    }
  }

  Block& mutable_at(const BlockId& id) {
    for (Block& b : blocks_) {
      if (b.id == id) return b;
    }
    throw PlanningError(ErrorCode::kUnknownBlock, id);
  }

 private:
  std::vector<Block> blocks_;
};

/// Edge gap between two square footprints, approximated from the centers.
inline double footprint_gap(const Block& a, const Block& b) {
  return (a.pose.center() - b.pose.center()).norm() -
         0.5 * (a.pose.size_l + b.pose.size_l);
}

/// Strictly taller blocks (object height) within the grasp clearance of `id`,
/// nearest first. Blocks in the same stack are ignored.
inline std::vector<BlockId> obstructors_of(const WorldState& w,
                                           const Workspace& ws,
                                           const BlockId& id) {
  std::vector<std::pair<double, BlockId>> near;
  if (!ws.obstruction_rule) return {};
  const Block& self = w.at(id);
  const BlockId base = w.base_of(id);
  for (const Block& o : w.blocks()) {
    if (o.id == id || w.base_of(o.id) == base) continue;
    if (o.pose.height <= self.pose.height) continue;
    const double gap = footprint_gap(self, o);
    if (gap < ws.grasp_clearance) near.emplace_back(gap, o.id);
  }
  std::sort(near.begin(), near.end());
  std::vector<BlockId> out;
  for (auto& [gap, oid] : near) out.push_back(oid);
  return out;
}

inline bool is_reachable(const Workspace& ws, const Block& b) {
  return inside_reach(ws.reach, b.pose.center(), 1e-7);
}

/// Goal test: the slot stack equals the goal stack, based within `tol` of the
/// target point. Subgoal kinds are never "satisfied" by a world alone.
inline bool goal_satisfied(const WorldState& w, const GoalSpec& g,
                           double tol = 1e-6) {
  if (!g.has_slot()) return false;
  if (g.stack.empty()) return true;
  const Block* base = w.find(g.stack.front());
  if (!base || base->below) return false;
  if ((base->pose.center() - g.target).norm() > tol) return false;
  return w.stack_from(base->id) == g.stack;
}

}  // namespace dlgp
