#pragma once

// Logical layer: grounded predicates, the pick-place / tool-pull operators,
// forward successor, the goal-directed pseudoinverse successor, and the
// applicable-action set consumed by forward search.

#include <compare>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dlgp/errors.hpp"
#include "dlgp/world.hpp"

namespace dlgp {

struct Support {
  enum class Kind { kTable, kSlot, kBlock };
  Kind kind = Kind::kTable;
  BlockId below;  // set when kind == kBlock

  static Support table() { return {Kind::kTable, {}}; }
  static Support slot() { return {Kind::kSlot, {}}; }
  static Support on(BlockId b) { return {Kind::kBlock, std::move(b)}; }
  auto operator<=>(const Support&) const = default;
};

struct SymbolicState {
  std::map<BlockId, Support> on;
  // Nothing stacked on the block.
  std::set<BlockId> stack_top;
  // Graspable: stack top and no taller neighbor within the grasp clearance.
  std::set<BlockId> clear;
  std::set<BlockId> reachable;
  // near_taller[b] lists the blocks obstructing b.
  std::map<BlockId, std::set<BlockId>> near_taller;
  std::optional<BlockId> holding;

  bool operator==(const SymbolicState&) const = default;

  bool is_clear(const BlockId& b) const { return clear.count(b) > 0; }
  bool is_reachable(const BlockId& b) const { return reachable.count(b) > 0; }
  bool is_stack_top(const BlockId& b) const { return stack_top.count(b) > 0; }

  std::optional<BlockId> above(const BlockId& b) const {
    for (const auto& [id, s] : on) {
      if (s.kind == Support::Kind::kBlock && s.below == b) return id;
    }
    return std::nullopt;
  }

  /// Bottom-up blocks standing at the goal slot.
  std::vector<BlockId> slot_stack() const {
    std::vector<BlockId> out;
    for (const auto& [id, s] : on) {
      if (s.kind == Support::Kind::kSlot) {
        out.push_back(id);
        break;
      }
    }
    if (out.empty()) return out;
    for (auto up = above(out.back()); up; up = above(out.back())) {
      out.push_back(*up);
    }
    return out;
  }
};

enum class ActionKind { kPickPlace, kToolPull };
enum class TargetKind { kGoalSlot, kFreePlacement, kReachEntry };

struct Action {
  ActionKind kind = ActionKind::kPickPlace;
  BlockId block;
  TargetKind target = TargetKind::kFreePlacement;

  auto operator<=>(const Action&) const = default;

  static Action pick_place(BlockId b, TargetKind t) {
    return {ActionKind::kPickPlace, std::move(b), t};
  }
  static Action tool_pull(BlockId b) {
    return {ActionKind::kToolPull, std::move(b), TargetKind::kReachEntry};
  }

  bool has_free_target() const { return target != TargetKind::kGoalSlot; }

  std::string to_string() const {
    if (kind == ActionKind::kToolPull) return "Pull[" + block + " #reach]";
    return "Pick[" + block +
           (target == TargetKind::kGoalSlot ? " #goal]" : " #free]");
  }
};

inline const char* to_string(ActionKind k) {
  return k == ActionKind::kPickPlace ? "pick_place" : "tool_pull";
}

inline const char* to_string(TargetKind t) {
  switch (t) {
    case TargetKind::kGoalSlot: return "goal_slot";
    case TargetKind::kFreePlacement: return "free";
    case TargetKind::kReachEntry: return "reach_entry";
  }
  return "?";
}

/// Grounds the geometric state into predicates. `slot` is the goal target
/// point, when the task has one.
inline SymbolicState abstract(const WorldState& w, const Workspace& ws,
                              const std::optional<Vec2>& slot = std::nullopt) {
  SymbolicState s;
  for (const Block& b : w.blocks()) {
    if (b.below) {
      s.on[b.id] = Support::on(*b.below);
    } else if (slot && (b.pose.center() - *slot).norm() <= ws.slot_tolerance()) {
      s.on[b.id] = Support::slot();
    } else {
      s.on[b.id] = Support::table();
    }
    if (w.is_stack_top(b.id)) s.stack_top.insert(b.id);
    if (is_reachable(ws, b)) s.reachable.insert(b.id);
    const auto obs = obstructors_of(w, ws, b.id);
    if (!obs.empty()) s.near_taller[b.id] = {obs.begin(), obs.end()};
    if (w.is_stack_top(b.id) && obs.empty()) s.clear.insert(b.id);
  }
  return s;
}

/// Name of the first violated precondition of `a` in `s`, or nullopt.
inline std::optional<std::string> violated_precondition(const SymbolicState& s,
                                                        const Action& a) {
  if (!s.on.count(a.block)) return "known_block";
  if (a.kind == ActionKind::kToolPull) {
    if (s.holding) return "hand_empty";
    if (a.target != TargetKind::kReachEntry) return "target";
    if (!s.is_stack_top(a.block)) return "clear";
    if (s.is_reachable(a.block)) return "out_of_reach";
    return std::nullopt;
  }
  if (a.target == TargetKind::kReachEntry) return "target";
  if (s.holding) {
    return *s.holding == a.block ? std::nullopt
                                 : std::optional<std::string>("hand_empty");
  }
  if (!s.is_stack_top(a.block)) return "clear";
  if (!s.is_clear(a.block)) return "unobstructed";
  if (!s.is_reachable(a.block)) return "reachable";
  if (a.target == TargetKind::kGoalSlot) {
    const auto slot = s.slot_stack();
    if (std::find(slot.begin(), slot.end(), a.block) != slot.end()) {
      return "not_in_slot";
    }
  }
  return std::nullopt;
}

/// Forward symbolic transition.
inline SymbolicState succ(const SymbolicState& s, const Action& a) {
  if (auto v = violated_precondition(s, a)) {
    throw PlanningError(ErrorCode::kInapplicableAction, *v);
  }
  SymbolicState n = s;
  const Support old = n.on.at(a.block);
  if (old.kind == Support::Kind::kBlock) {
    n.stack_top.insert(old.below);
    if (!n.near_taller.count(old.below)) n.clear.insert(old.below);
  }
  // The moved block no longer obstructs anything at its old position.
  for (auto it = n.near_taller.begin(); it != n.near_taller.end();) {
    it->second.erase(a.block);
    if (it->second.empty()) {
      if (n.is_stack_top(it->first)) n.clear.insert(it->first);
      it = n.near_taller.erase(it);
    } else {
      ++it;
    }
  }
  n.near_taller.erase(a.block);
  if (a.target == TargetKind::kGoalSlot) {
    const auto slot = n.slot_stack();
    if (slot.empty()) {
      n.on[a.block] = Support::slot();
    } else {
      n.on[a.block] = Support::on(slot.back());
      n.stack_top.erase(slot.back());
      n.clear.erase(slot.back());
    }
  } else {
    n.on[a.block] = Support::table();
  }
  n.stack_top.insert(a.block);
  n.clear.insert(a.block);
  n.reachable.insert(a.block);
  n.holding.reset();
  return n;
}

enum class PredicateKind { kOnSlot, kOn, kRelocated, kReachable };

struct Predicate {
  PredicateKind kind;
  BlockId block;
  BlockId below;  // for kOn
  auto operator<=>(const Predicate&) const = default;
};

// Ordered conjunction of predicates: the grounding of a goal.
struct SymbolicTarget {
  std::vector<Predicate> predicates;
};

inline SymbolicTarget ground(const GoalSpec& g) {
  SymbolicTarget t;
  switch (g.kind) {
    case GoalKind::kStack:
    case GoalKind::kSinglePick:
      for (std::size_t i = 0; i < g.stack.size(); ++i) {
        if (i == 0) {
          t.predicates.push_back({PredicateKind::kOnSlot, g.stack[0], {}});
        } else {
          t.predicates.push_back(
              {PredicateKind::kOn, g.stack[i], g.stack[i - 1]});
        }
      }
      break;
    case GoalKind::kRelocate:
      t.predicates.push_back({PredicateKind::kRelocated, g.block, {}});
      break;
    case GoalKind::kBringIntoReach:
      t.predicates.push_back({PredicateKind::kReachable, g.block, {}});
      break;
  }
  return t;
}

/// Number of leading stack predicates already satisfied by the slot stack.
inline std::size_t satisfied_prefix(const SymbolicState& s,
                                    const SymbolicTarget& t) {
  const auto slot = s.slot_stack();
  std::size_t k = 0;
  for (const Predicate& p : t.predicates) {
    if (p.kind != PredicateKind::kOnSlot && p.kind != PredicateKind::kOn) break;
    if (k >= slot.size() || slot[k] != p.block) break;
    ++k;
  }
  return k;
}

inline bool predicate_holds(const SymbolicState& s, const SymbolicTarget& t,
                            std::size_t index) {
  const Predicate& p = t.predicates[index];
  switch (p.kind) {
    case PredicateKind::kOnSlot:
    case PredicateKind::kOn:
      return index < satisfied_prefix(s, t);
    case PredicateKind::kRelocated:
      return false;
    case PredicateKind::kReachable:
      return s.is_reachable(p.block);
  }
  return false;
}

inline bool target_satisfied(const SymbolicState& s, const SymbolicTarget& t) {
  for (std::size_t i = 0; i < t.predicates.size(); ++i) {
    if (!predicate_holds(s, t, i)) return false;
  }
  return true;
}

/// Pseudoinverse successor: the single action that advances `s` toward `t`
/// on its lowest unsatisfied predicate, ignoring applicability.
inline Action succ_dagger(const SymbolicState& s, const SymbolicTarget& t) {
  for (std::size_t i = 0; i < t.predicates.size(); ++i) {
    if (predicate_holds(s, t, i)) continue;
    const Predicate& p = t.predicates[i];
    switch (p.kind) {
      case PredicateKind::kOnSlot:
      case PredicateKind::kOn:
        return Action::pick_place(p.block, TargetKind::kGoalSlot);
      case PredicateKind::kRelocated:
        return Action::pick_place(p.block, TargetKind::kFreePlacement);
      case PredicateKind::kReachable:
        return Action::tool_pull(p.block);
    }
  }
  throw PlanningError(ErrorCode::kAlreadySatisfied, "target already holds");
}

/// Every action whose symbolic preconditions hold in `s`.
inline std::vector<Action> applicable_actions(const SymbolicState& s) {
  std::vector<Action> out;
  if (s.holding) {
    for (TargetKind t : {TargetKind::kGoalSlot, TargetKind::kFreePlacement}) {
      const Action a = Action::pick_place(*s.holding, t);
      if (!violated_precondition(s, a)) out.push_back(a);
    }
    return out;
  }
  for (const auto& [id, support] : s.on) {
    for (TargetKind t : {TargetKind::kGoalSlot, TargetKind::kFreePlacement}) {
      const Action a = Action::pick_place(id, t);
      if (!violated_precondition(s, a)) out.push_back(a);
    }
    const Action pull = Action::tool_pull(id);
    if (!violated_precondition(s, pull)) out.push_back(pull);
  }
  return out;
}

/// Checks the forest invariant: one support each, no cycles, at most one
/// block per support, slot used by at most one base.
inline bool is_forest(const SymbolicState& s) {
  std::set<BlockId> supports_used;
  int slot_bases = 0;
  for (const auto& [id, sup] : s.on) {
    if (sup.kind == Support::Kind::kSlot) ++slot_bases;
    if (sup.kind != Support::Kind::kBlock) continue;
    if (!s.on.count(sup.below) || sup.below == id) return false;
    if (!supports_used.insert(sup.below).second) return false;
  }
  if (slot_bases > 1) return false;
  for (const auto& [id, sup] : s.on) {
    BlockId cur = id;
    for (std::size_t steps = 0;; ++steps) {
      if (steps > s.on.size()) return false;
      const Support& c = s.on.at(cur);
      if (c.kind != Support::Kind::kBlock) break;
      cur = c.below;
    }
  }
  return true;
}

}  // namespace dlgp
