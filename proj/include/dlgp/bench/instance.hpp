#pragma once

// Seeded benchmark instances: OP-X (grasp a short block buried among taller
// ones), Tower-X (build a tower in a given order from mixed stacks) and
// TowerTool-X (as Tower, with some blocks beyond reach on a larger table).

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "dlgp/errors.hpp"
#include "dlgp/random.hpp"
#include "dlgp/world.hpp"

namespace dlgp::bench {

enum class Domain { kOp, kTower, kTowerTool };

inline const char* to_string(Domain d) {
  switch (d) {
    case Domain::kOp: return "op";
    case Domain::kTower: return "tower";
    case Domain::kTowerTool: return "tower-tool";
  }
  return "?";
}

inline std::optional<Domain> parse_domain(const std::string& s) {
  if (s == "op") return Domain::kOp;
  if (s == "tower") return Domain::kTower;
  if (s == "tower-tool") return Domain::kTowerTool;
  return std::nullopt;
}

inline std::string domain_label(Domain d) {
  switch (d) {
    case Domain::kOp: return "OP";
    case Domain::kTower: return "Tower";
    case Domain::kTowerTool: return "TowerTool";
  }
  return "?";
}

struct Instance {
  Domain domain = Domain::kOp;
  int x = 0;
  std::uint64_t seed = 0;
  WorldState world0;
  GoalSpec goal;
  Workspace ws;

  /// Stable identifier, e.g. "Tower-4/s3"; zero-padded so lexical order
  /// follows the seed.
  std::string id() const {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s-%02d/s%06llu", domain_label(domain).c_str(),
                  x, static_cast<unsigned long long>(seed));
    return buf;
  }
};

// Uniform draws built directly from the engine's bits so that instances are
// identical across standard library implementations.
using dlgp::Sampler;

struct GeneratorConfig {
  double short_height = 0.05;
  double tall_height = 0.10;
  // OP: a new block joins the obstruction cluster with probability
  // 1 - attach_shift / X (clamped), otherwise it is placed in the open.
  double attach_shift = 3.5;
  // OP: edge gap between a cluster block and the block it attaches to.
  double attach_gap_min = 0.03;
  double attach_gap_max = 0.05;
  // OP: height increment over the block attached to.
  double height_step_min = 0.002;
  double height_step_max = 0.01;
  // Tower: probability that a block starts on top of an existing stack.
  double stack_probability = 0.3;
  int max_stack_height = 3;
  // TowerTool: table half-size, and the fraction of blocks beyond reach.
  double tool_table_half = 1.1;
  double out_of_reach_fraction = 0.7;
  int max_attempts = 2000;
};

namespace detail {

inline std::string block_name(int i) {
  std::string s;
  int k = i;
  do {
    s.insert(s.begin(), static_cast<char>('A' + k % 26));
    k = k / 26 - 1;
  } while (k >= 0);
  return s;
}

inline Block make_block(const std::string& id, const Vec2& c, double theta,
                        double height, double l) {
  Block b;
  b.id = id;
  b.pose = BlockPose{c.x(), c.y(), normalize_angle(theta), height, l};
  return b;
}

// Axis-aligned square footprints never overlap once the centers are a
// diagonal apart; rotated blocks need the full diagonal.
inline double min_center_distance(const Workspace& ws) {
  return ws.block_size * std::sqrt(2.0) + 0.005;
}

inline bool far_enough(const std::vector<Block>& blocks, const Vec2& c,
                       double min_dist) {
  for (const Block& b : blocks) {
    if (!b.below && (b.pose.center() - c).norm() < min_dist) return false;
  }
  return true;
}

// Margin from the table edge so rotated blocks stay on the table.
inline bool on_table(const Workspace& ws, const Vec2& c) {
  return ws.table.contains(c, ws.block_size * std::sqrt(2.0));
}

inline Vec2 random_point(Sampler& rng, const TableBounds& t) {
  return {rng.uniform(t.x_min, t.x_max), rng.uniform(t.y_min, t.y_max)};
}

// Free slot target: inside reach and table, well away from every block.
inline Vec2 pick_slot(Sampler& rng, const Workspace& ws,
                      const std::vector<Block>& blocks, int max_attempts) {
  const double keep = ws.block_size + ws.grasp_clearance + 0.01;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    const Vec2 c = random_point(rng, ws.table);
    if (!ws.table.contains(c, ws.block_size) ||
        !inside_reach(ws.reach, c, 0.0) ||
        (ws.reach.center - c).norm() > ws.reach.apothem() - 0.05) {
      continue;
    }
    if (far_enough(blocks, c, keep + ws.block_size)) return c;
  }
  throw PlanningError(ErrorCode::kGenerationExhausted, "no free goal slot");
}

inline Instance gen_op(int x, std::uint64_t seed, const GeneratorConfig& cfg) {
  Instance inst{Domain::kOp, x, seed, {}, {}, {}};
  const Workspace& ws = inst.ws;
  Sampler rng(seed);
  const double l = ws.block_size;
  const double min_dist = min_center_distance(ws);
  const double p_attach =
      std::clamp(1.0 - cfg.attach_shift / x, 0.3, 0.95);

  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    std::vector<Block> blocks;
    std::vector<bool> in_cluster;
    // Short target near the middle of the table.
    const Vec2 t(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2));
    blocks.push_back(make_block("target", t, rng.uniform(-3.14, 3.14), cfg.short_height, l));
    in_cluster.push_back(true);
    bool ok = true;
    for (int i = 1; i < x && ok; ++i) {
      const std::string id = block_name(i - 1);
      // The first neighbor always obstructs the target.
      const bool attach = i == 1 || rng.chance(p_attach);
      bool placed = false;
      for (int tries = 0; tries < 400 && !placed; ++tries) {
        if (attach) {
          std::vector<std::size_t> members;
          for (std::size_t k = 0; k < blocks.size(); ++k) {
            if (in_cluster[k]) members.push_back(k);
          }
          const Block& parent = blocks[i == 1 ? 0 : members[rng.index(members.size())]];
          const double gap = rng.uniform(cfg.attach_gap_min, cfg.attach_gap_max);
          const double phi = rng.uniform(-std::numbers::pi, std::numbers::pi);
          const Vec2 c = parent.pose.center() + (l + gap) * Vec2(std::cos(phi), std::sin(phi));
          if (!on_table(ws, c) || !far_enough(blocks, c, min_dist)) continue;
          // Stay clear of open-field blocks so they remain outside the cluster.
          bool clear_of_open = true;
          for (std::size_t k = 0; k < blocks.size(); ++k) {
            if (!in_cluster[k] &&
                (blocks[k].pose.center() - c).norm() < l + ws.grasp_clearance + 0.005) {
              clear_of_open = false;
            }
          }
          if (!clear_of_open) continue;
          const double h = parent.pose.height +
                           rng.uniform(cfg.height_step_min, cfg.height_step_max);
          blocks.push_back(make_block(id, c, rng.uniform(-3.14, 3.14), h, l));
          in_cluster.push_back(true);
          placed = true;
        } else {
          const Vec2 c = random_point(rng, ws.table);
          if (!on_table(ws, c) ||
              !far_enough(blocks, c, l + ws.grasp_clearance + 0.005)) {
            continue;
          }
          blocks.push_back(make_block(id, c, rng.uniform(-3.14, 3.14),
                                      cfg.tall_height, l));
          in_cluster.push_back(false);
          placed = true;
        }
      }
      ok = placed;
    }
    if (!ok) continue;
    try {
      inst.goal.target = pick_slot(rng, ws, blocks, 200);
    } catch (const PlanningError&) {
      continue;
    }
    inst.goal.kind = GoalKind::kSinglePick;
    inst.goal.stack = {"target"};
    inst.world0 = WorldState(blocks);
    return inst;
  }
  throw PlanningError(ErrorCode::kGenerationExhausted,
                      "OP-" + std::to_string(x) + " layout");
}

inline Instance gen_tower(Domain domain, int x, std::uint64_t seed,
                          const GeneratorConfig& cfg) {
  Instance inst{domain, x, seed, {}, {}, {}};
  Workspace& ws = inst.ws;
  const bool tool = domain == Domain::kTowerTool;
  if (tool) {
    const double h = cfg.tool_table_half;
    ws.table = TableBounds{-h, h, -h, h};
  }
  Sampler rng(seed);
  const double l = ws.block_size;
  const double min_dist = min_center_distance(ws) + 0.02;
  const int far_count =
      tool ? std::max(1, static_cast<int>(std::lround(x * cfg.out_of_reach_fraction)))
           : 0;

  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    std::vector<Block> blocks;
    bool ok = true;
    for (int i = 0; i < x && ok; ++i) {
      const std::string id = block_name(i);
      const bool far = i >= x - far_count;
      // Stack onto an existing in-reach stack top?
      if (!far && !blocks.empty() && rng.chance(cfg.stack_probability)) {
        std::vector<BlockId> tops;
        for (const Block& b : blocks) {
          const WorldState w(blocks);
          if (!w.is_stack_top(b.id) || !is_reachable(ws, b)) continue;
          if (static_cast<int>(w.stack_from(w.base_of(b.id)).size()) >=
              cfg.max_stack_height) {
            continue;
          }
          tops.push_back(b.id);
        }
        if (!tops.empty()) {
          const Block support = WorldState(blocks).at(tops[rng.index(tops.size())]);
          Block b = support;
          b.id = id;
          b.below = support.id;
          blocks.push_back(b);
          continue;
        }
      }
      bool placed = false;
      for (int tries = 0; tries < 400 && !placed; ++tries) {
        const Vec2 c = random_point(rng, ws.table);
        if (!on_table(ws, c) || !far_enough(blocks, c, min_dist)) continue;
        const bool reachable = inside_reach(ws.reach, c, 0.0);
        if (far) {
          // Out of reach, but by no more than a tool's length.
          if (reachable || (c - ws.reach.center).norm() > ws.reach.radius + 0.35) {
            continue;
          }
        } else if (!inside_reach(ws.reach, c, -0.03)) {
          continue;
        }
        blocks.push_back(make_block(id, c, rng.uniform(-3.14, 3.14),
                                    cfg.short_height, l));
        placed = true;
      }
      ok = placed;
    }
    if (!ok) continue;
    try {
      inst.goal.target = pick_slot(rng, ws, blocks, 200);
    } catch (const PlanningError&) {
      continue;
    }
    std::vector<BlockId> order;
    for (const Block& b : blocks) order.push_back(b.id);
    rng.shuffle(order);
    inst.goal.kind = GoalKind::kStack;
    inst.goal.stack = order;
    inst.world0 = WorldState(blocks);
    return inst;
  }
  throw PlanningError(ErrorCode::kGenerationExhausted,
                      domain_label(domain) + "-" + std::to_string(x) + " layout");
}

}  // namespace detail

/// Deterministic instance for (domain, X, seed).
inline Instance gen_instance(Domain domain, int x, std::uint64_t seed,
                             const GeneratorConfig& cfg = {}) {
  if (x < 2) throw PlanningError(ErrorCode::kInvalidInput, "X must be at least 2");
  if (domain == Domain::kOp) return detail::gen_op(x, seed, cfg);
  return detail::gen_tower(domain, x, seed, cfg);
}

}  // namespace dlgp::bench
