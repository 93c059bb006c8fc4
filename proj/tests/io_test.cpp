#include "dlgp/io.hpp"

#include <gtest/gtest.h>

#include "fixtures.hpp"

namespace dlgp {
namespace {

TEST(Io, InstanceRoundTripIsByteStable) {
  for (bench::Domain d : {bench::Domain::kOp, bench::Domain::kTower, bench::Domain::kTowerTool}) {
    const bench::Instance inst = bench::gen_instance(d, 5, 3);
    const std::string once = io::to_json(inst).dump();
    const bench::Instance back = io::instance_from_json(Json::parse(once));
    EXPECT_EQ(back.world0, inst.world0);
    EXPECT_EQ(back.goal, inst.goal);
    EXPECT_EQ(back.id(), inst.id());
    EXPECT_EQ(io::to_json(back).dump(), once);
    // Same seed, same bytes.
    EXPECT_EQ(io::to_json(bench::gen_instance(d, 5, 3)).dump(), once);
  }
}

TEST(Io, PlanRoundTripReplays) {
  const testing::BuriedBase f;
  PlannerConfig cfg;
  cfg.ws = f.ws;
  const Plan p = dts_solve(f.world, f.goal, cfg);
  const Plan back = io::plan_from_json(Json::parse(io::to_json(p).dump()));
  EXPECT_EQ(back.skeleton, p.skeleton);
  EXPECT_EQ(back.keyframes, p.keyframes);
  EXPECT_EQ(back.ee_displacement, p.ee_displacement);
  EXPECT_TRUE(replay_plan(back, f.goal, f.ws).ok);
  Json stale = io::to_json(p);
  stale.erase("schema_version");
  EXPECT_THROW(io::plan_from_json(stale), PlanningError);
}

TEST(Io, ScenarioRoundTrip) {
  const Scenario sc =
      io::load_scenario(std::string(DLGP_DATA_DIR) + "/scenarios/tool_pull_recovery.json");
  EXPECT_EQ(sc.goal.stack, (std::vector<BlockId>{"D", "C", "B", "A"}));
  ASSERT_EQ(sc.disturbances.size(), 1u);
  EXPECT_EQ(sc.disturbances[0].kind, DisturbanceKind::kPushOutOfReach);
  const Scenario back = io::scenario_from_json(io::to_json(sc));
  EXPECT_EQ(io::to_json(back).dump(), io::to_json(sc).dump());
}

TEST(Io, RejectsWrongVersionAndBadFields) {
  Json j = io::to_json(bench::gen_instance(bench::Domain::kTower, 3, 0));
  j["schema_version"] = 2;
  EXPECT_THROW(io::instance_from_json(j), PlanningError);
  j["schema_version"] = kSchemaVersion;
  j["goal"]["kind"] = "pyramid";
  EXPECT_THROW(io::instance_from_json(j), PlanningError);
  EXPECT_THROW(io::load_instance("/nonexistent/instance.json"), PlanningError);
}

TEST(Io, StackedBlocksSnapToSupport) {
  const Json w = Json::parse(R"([{"id":"A","x":0.1,"y":0.2},
                                  {"id":"B","x":9,"y":9,"on":"A"}])");
  const WorldState ws = io::world_from_json(w);
  EXPECT_EQ(ws.at("B").pose.center(), Vec2(0.1, 0.2));
  EXPECT_EQ(ws.at("B").below, "A");
}

}  // namespace
}  // namespace dlgp
