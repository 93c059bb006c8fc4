#pragma once

// JSON documents for instances, plans, scenarios and traces. Every top-level
// document carries "schema_version"; readers reject other versions.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dlgp/bench/instance.hpp"
#include "dlgp/planner.hpp"
#include "dlgp/sim.hpp"

namespace dlgp {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

namespace io {

inline Json vec(const Vec2& v) { return Json::array({v.x(), v.y()}); }

inline Vec2 vec(const Json& j) {
  if (!j.is_array() || j.size() != 2) {
    throw PlanningError(ErrorCode::kInvalidInput, "expected [x, y], got " + j.dump());
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

// Every top-level reader calls this first.
inline void check_version(const Json& j, const char* what) {
  const int v = j.value("schema_version", -1);
  if (v != kSchemaVersion) {
    throw PlanningError(ErrorCode::kInvalidInput,
                        std::string(what) + ": unsupported schema_version " +
                            std::to_string(v));
  }
}

// ---------------------------------------------------------------------------
// World

inline Json to_json(const Block& b) {
  Json j = {{"id", b.id},
            {"x", b.pose.x},
            {"y", b.pose.y},
            {"theta", b.pose.theta},
            {"height", b.pose.height},
            {"size", b.pose.size_l}};
  if (b.below) j["on"] = *b.below;
  return j;
}

inline Block block_from_json(const Json& j) {
  Block b;
  b.id = j.at("id").get<std::string>();
  b.pose.x = j.at("x").get<double>();
  b.pose.y = j.at("y").get<double>();
  b.pose.theta = j.value("theta", 0.0);
  b.pose.height = j.value("height", 0.05);
  b.pose.size_l = j.value("size", 0.05);
  if (j.contains("on")) b.below = j.at("on").get<std::string>();
  return b;
}

inline Json to_json(const WorldState& w) {
  Json arr = Json::array();
  for (const Block& b : w.blocks()) arr.push_back(to_json(b));
  return arr;
}

inline WorldState world_from_json(const Json& j) {
  std::vector<Block> blocks;
  for (const Json& b : j) blocks.push_back(block_from_json(b));
  // Stacked blocks sit exactly on their support.
  WorldState w(blocks);
  for (const Block& b : blocks) {
    if (b.below) w.place_on(b.id, *b.below);
  }
  return w;
}

inline Json to_json(const Workspace& ws) {
  return {{"table", {ws.table.x_min, ws.table.x_max, ws.table.y_min, ws.table.y_max}},
          {"reach_center", vec(ws.reach.center)},
          {"reach_radius", ws.reach.radius},
          {"reach_sides", ws.reach.polygon_sides},
          {"block_size", ws.block_size},
          {"collision_margin", ws.collision_margin},
          {"grasp_clearance", ws.grasp_clearance},
          {"obstruction_rule", ws.obstruction_rule}};
}

inline Workspace workspace_from_json(const Json& j) {
  Workspace ws;
  if (j.contains("table")) {
    const Json& t = j.at("table");
    ws.table = TableBounds{t.at(0).get<double>(), t.at(1).get<double>(),
                           t.at(2).get<double>(), t.at(3).get<double>()};
  }
  if (j.contains("reach_center")) ws.reach.center = vec(j.at("reach_center"));
  ws.reach.radius = j.value("reach_radius", ws.reach.radius);
  ws.reach.polygon_sides = j.value("reach_sides", ws.reach.polygon_sides);
  ws.block_size = j.value("block_size", ws.block_size);
  ws.collision_margin = j.value("collision_margin", ws.collision_margin);
  ws.grasp_clearance = j.value("grasp_clearance", ws.grasp_clearance);
  ws.obstruction_rule = j.value("obstruction_rule", ws.obstruction_rule);
  return ws;
}

inline Json to_json(const GoalSpec& g) {
  Json j = {{"kind", to_string(g.kind)}};
  if (g.has_slot()) {
    j["stack"] = g.stack;
    j["target"] = vec(g.target);
  } else {
    j["block"] = g.block;
  }
  return j;
}

inline GoalSpec goal_from_json(const Json& j) {
  GoalSpec g;
  const std::string kind = j.value("kind", std::string("stack"));
  bool known = false;
  for (GoalKind k : {GoalKind::kStack, GoalKind::kSinglePick, GoalKind::kRelocate,
                     GoalKind::kBringIntoReach}) {
    if (kind == to_string(k)) {
      g.kind = k;
      known = true;
    }
  }
  if (!known) throw PlanningError(ErrorCode::kInvalidInput, "goal kind " + kind);
  if (g.has_slot()) {
    g.stack = j.at("stack").get<std::vector<std::string>>();
    g.target = vec(j.at("target"));
  } else {
    g.block = j.at("block").get<std::string>();
  }
  return g;
}

// ---------------------------------------------------------------------------
// Plans

inline Json to_json(const Action& a) {
  return {{"kind", to_string(a.kind)}, {"block", a.block}, {"target", to_string(a.target)}};
}

inline Action action_from_json(const Json& j) {
  Action a;
  a.block = j.at("block").get<std::string>();
  const std::string kind = j.at("kind").get<std::string>();
  const std::string target = j.at("target").get<std::string>();
  if (kind == "pick_place") {
    a.kind = ActionKind::kPickPlace;
  } else if (kind == "tool_pull") {
    a.kind = ActionKind::kToolPull;
  } else {
    throw PlanningError(ErrorCode::kInvalidInput, "action kind " + kind);
  }
  if (target == "goal_slot") {
    a.target = TargetKind::kGoalSlot;
  } else if (target == "free") {
    a.target = TargetKind::kFreePlacement;
  } else if (target == "reach_entry") {
    a.target = TargetKind::kReachEntry;
  } else {
    throw PlanningError(ErrorCode::kInvalidInput, "action target " + target);
  }
  return a;
}

inline Json to_json(const Plan& p, bool with_worlds = true) {
  Json skel = Json::array();
  Json keys = Json::array();
  for (std::size_t k = 0; k < p.skeleton.size(); ++k) {
    skel.push_back(to_json(p.skeleton[k]));
    keys.push_back(vec(p.keyframes[k]));
  }
  Json j = {{"schema_version", kSchemaVersion},
            {"type", "plan"},
            {"skeleton", skel},
            {"keyframes", keys},
            {"ee_displacement", p.ee_displacement},
            {"makespan", p.makespan},
            {"nodes_visited", p.nodes_visited},
            {"miqp_nodes", p.miqp_nodes},
            {"phase_duration", p.phase_duration},
            {"unrefined", p.unrefined}};
  if (with_worlds) {
    Json worlds = Json::array();
    for (const WorldState& w : p.worlds) worlds.push_back(to_json(w));
    j["worlds"] = worlds;
  }
  return j;
}

inline Plan plan_from_json(const Json& j) {
  check_version(j, "plan");
  Plan p;
  for (const Json& a : j.at("skeleton")) p.skeleton.push_back(action_from_json(a));
  for (const Json& k : j.at("keyframes")) p.keyframes.push_back(vec(k));
  if (j.contains("worlds")) {
    for (const Json& w : j.at("worlds")) p.worlds.push_back(world_from_json(w));
  }
  p.ee_displacement = j.value("ee_displacement", 0.0);
  p.makespan = j.value("makespan", static_cast<int>(p.skeleton.size()));
  p.nodes_visited = j.value("nodes_visited", std::int64_t{0});
  p.miqp_nodes = j.value("miqp_nodes", std::int64_t{0});
  p.phase_duration = j.value("phase_duration", 1.0);
  p.unrefined = j.value("unrefined", false);
  return p;
}

// ---------------------------------------------------------------------------
// Instances and scenarios

inline Json to_json(const bench::Instance& inst) {
  return {{"schema_version", kSchemaVersion},
          {"type", "instance"},
          {"id", inst.id()},
          {"domain", bench::to_string(inst.domain)},
          {"x", inst.x},
          {"seed", inst.seed},
          {"workspace", to_json(inst.ws)},
          {"world", to_json(inst.world0)},
          {"goal", to_json(inst.goal)}};
}

inline bench::Instance instance_from_json(const Json& j) {
  check_version(j, "instance");
  bench::Instance inst;
  const std::string domain = j.value("domain", std::string("tower"));
  const auto d = bench::parse_domain(domain);
  if (!d) throw PlanningError(ErrorCode::kInvalidInput, "domain " + domain);
  inst.domain = *d;
  inst.seed = j.value("seed", std::uint64_t{0});
  inst.ws = workspace_from_json(j.value("workspace", Json::object()));
  inst.world0 = world_from_json(j.at("world"));
  inst.goal = goal_from_json(j.at("goal"));
  inst.x = j.value("x", static_cast<int>(inst.world0.size()));
  return inst;
}

inline Json to_json(const Disturbance& d) {
  Json p = {{"block", d.params.block}};
  if (d.kind == DisturbanceKind::kDisplace) p["delta"] = vec(d.params.delta);
  if (d.kind == DisturbanceKind::kPushOutOfReach) p["beyond"] = d.params.beyond;
  return {{"after_action", d.after_action},
          {"kind", to_string(d.kind)},
          {"params", p},
          {"seed", d.seed}};
}

inline Disturbance disturbance_from_json(const Json& j) {
  Disturbance d;
  d.after_action = j.at("after_action").get<int>();
  const std::string kind = j.at("kind").get<std::string>();
  const auto k = parse_disturbance_kind(kind);
  if (!k) throw PlanningError(ErrorCode::kInvalidInput, "disturbance kind " + kind);
  d.kind = *k;
  const Json& p = j.at("params");
  d.params.block = p.at("block").get<std::string>();
  if (p.contains("delta")) d.params.delta = vec(p.at("delta"));
  d.params.beyond = p.value("beyond", d.params.beyond);
  d.seed = j.value("seed", std::uint64_t{0});
  return d;
}

inline Json to_json(const Scenario& sc) {
  Json dist = Json::array();
  for (const Disturbance& d : sc.disturbances) dist.push_back(to_json(d));
  return {{"schema_version", kSchemaVersion},
          {"type", "scenario"},
          {"name", sc.name},
          {"workspace", to_json(sc.ws)},
          {"world", to_json(sc.world0)},
          {"goal", to_json(sc.goal)},
          {"disturbances", dist},
          {"noise_stddev", sc.noise_stddev},
          {"max_replans", sc.max_replans},
          {"seed", sc.seed}};
}

inline Scenario scenario_from_json(const Json& j) {
  check_version(j, "scenario");
  Scenario sc;
  sc.name = j.value("name", std::string());
  sc.ws = workspace_from_json(j.value("workspace", Json::object()));
  sc.world0 = world_from_json(j.at("world"));
  sc.goal = goal_from_json(j.at("goal"));
  for (const Json& d : j.value("disturbances", Json::array())) {
    sc.disturbances.push_back(disturbance_from_json(d));
  }
  sc.noise_stddev = j.value("noise_stddev", 0.0);
  sc.max_replans = j.value("max_replans", sc.max_replans);
  sc.seed = j.value("seed", std::uint64_t{0});
  return sc;
}

// ---------------------------------------------------------------------------
// Traces: one JSON line per executed step, then one outcome line.

inline std::string trace_jsonl(const Trace& t) {
  std::string out;
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    const TraceStep& s = t.steps[i];
    Json j = {{"schema_version", kSchemaVersion},
              {"step", i},
              {"observed", to_json(s.observed)},
              {"plan", to_json(s.plan, false)},
              {"executed", to_json(s.executed)},
              {"keyframe", vec(s.keyframe)},
              {"disturbance", s.disturbance ? to_json(*s.disturbance) : Json(nullptr)}};
    out += j.dump() + "\n";
  }
  Json end = {{"schema_version", kSchemaVersion},
              {"outcome", t.success ? "success" : "failure"},
              {"replan_count", t.replan_count},
              {"final_world", to_json(t.final_world)}};
  if (!t.success) end["reason"] = t.reason;
  out += end.dump() + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Files

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PlanningError(ErrorCode::kInvalidInput, "cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw PlanningError(ErrorCode::kInvalidInput, path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PlanningError(ErrorCode::kInvalidInput, "cannot write " + path);
  out << text;
}

// Runs `f` and turns JSON access errors into InvalidInput.
template <typename F>
auto parse_or_invalid(const char* what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw PlanningError(ErrorCode::kInvalidInput, std::string(what) + ": " + e.what());
  }
}

inline bench::Instance load_instance(const std::string& path) {
  const Json j = read_json_file(path);
  return parse_or_invalid("instance", [&] { return instance_from_json(j); });
}

inline Scenario load_scenario(const std::string& path) {
  const Json j = read_json_file(path);
  return parse_or_invalid("scenario", [&] { return scenario_from_json(j); });
}

}  // namespace io
}  // namespace dlgp
