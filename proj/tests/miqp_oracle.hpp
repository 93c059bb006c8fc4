#pragma once

// Test-only oracles for the two-dimensional placement MIQP:
//  * leaf enumeration: every combination of branches, each leaf solved by
//    brute force over active sets of size <= 2 (exact for a strictly convex
//    objective in the plane);
//  * grid search over the table at a fixed resolution.

#include <cmath>
#include <limits>
#include <random>

#include "dlgp/miqp.hpp"

namespace dlgp::testing {

struct PlaneOptimum {
  bool feasible = false;
  Vec2 u = Vec2::Zero();
  double objective = std::numeric_limits<double>::infinity();
};

inline double plane_objective(const MiqpModel& m, const Vec2& u) {
  return m.objective.objective(u);
}

/// min of the model objective subject to `rows`, by enumerating active sets
/// of at most two rows.
inline PlaneOptimum solve_plane(const MiqpModel& m,
                                const std::vector<LinearRow>& rows) {
  const Eigen::Matrix2d Q = m.objective.Q;
  const Vec2 q = m.objective.q;
  PlaneOptimum best;
  auto consider = [&](const Vec2& u) {
    for (const LinearRow& r : rows) {
      if (r.a.dot(u) < r.b - 1e-9) return;
    }
    const double f = plane_objective(m, u);
    if (f < best.objective) best = {true, u, f};
  };
  consider(Q.ldlt().solve(-q));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    // KKT: Q u + q = lambda a, a.u = b
    Eigen::Matrix3d K = Eigen::Matrix3d::Zero();
    K.topLeftCorner<2, 2>() = Q;
    K.block<2, 1>(0, 2) = -rows[i].a;
    K.block<1, 2>(2, 0) = rows[i].a.transpose();
    Eigen::Vector3d rhs(-q(0), -q(1), rows[i].b);
    consider(K.fullPivLu().solve(rhs).head<2>());
    for (std::size_t j = i + 1; j < rows.size(); ++j) {
      Eigen::Matrix2d A;
      A.row(0) = rows[i].a.transpose();
      A.row(1) = rows[j].a.transpose();
      if (std::abs(A.determinant()) < 1e-12) continue;
      consider(A.inverse() * Vec2(rows[i].b, rows[j].b));
    }
  }
  return best;
}

/// Exhaustive enumeration of all 4^D branch assignments.
inline PlaneOptimum enumerate_leaves(const MiqpModel& m) {
  const std::size_t nd = m.disjunctions.size();
  std::size_t leaves = 1;
  for (std::size_t d = 0; d < nd; ++d) leaves *= 4;
  PlaneOptimum best;
  for (std::size_t code = 0; code < leaves; ++code) {
    std::vector<LinearRow> rows = m.convex;
    std::size_t c = code;
    for (std::size_t d = 0; d < nd; ++d) {
      rows.push_back(m.disjunctions[d].branches[c % 4]);
      c /= 4;
    }
    const PlaneOptimum leaf = solve_plane(m, rows);
    if (leaf.feasible && leaf.objective < best.objective) best = leaf;
  }
  return best;
}

/// Cheapest feasible grid point over the table rectangle.
inline PlaneOptimum grid_search(const MiqpModel& m, const TableBounds& t,
                                double step) {
  PlaneOptimum best;
  const int nx = static_cast<int>(std::floor((t.x_max - t.x_min) / step));
  const int ny = static_cast<int>(std::floor((t.y_max - t.y_min) / step));
  for (int i = 0; i <= nx; ++i) {
    for (int j = 0; j <= ny; ++j) {
      const Vec2 u(t.x_min + i * step, t.y_min + j * step);
      if (!m.feasible(u, 0.0)) continue;
      const double f = plane_objective(m, u);
      if (f < best.objective) best = {true, u, f};
    }
  }
  return best;
}

struct RandomPlacement {
  WorldState world;
  Workspace ws;
  Vec2 anchor;
  MiqpModel model;
};

/// Random placement problem with up to three obstacles. Small tables make a
/// fraction of the instances infeasible; `cramped` forces a small table with
/// three obstacles, which is often infeasible.
inline RandomPlacement random_placement(std::mt19937_64& rng, bool cramped = false) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RandomPlacement r;
  double half = unit(rng) < 0.25 ? 0.06 + 0.04 * unit(rng)
                                 : 0.15 + 0.2 * unit(rng);
  if (cramped) half = 0.04 + 0.03 * unit(rng);
  r.ws.table = TableBounds{-half, half, -half, half};
  r.ws.collision_margin = unit(rng) < 0.5 ? 0.025 : 0.0;
  if (cramped) r.ws.collision_margin = 0.025;
  const int obstacles = cramped ? 3 : static_cast<int>(rng() % 4);
  std::vector<Block> blocks;
  Block moved;
  moved.id = "m";
  moved.pose = BlockPose{0.0, 0.0, 0.0, 0.05, 0.05};
  blocks.push_back(moved);
  for (int k = 0; k < obstacles; ++k) {
    Block b;
    b.id = "o" + std::to_string(k);
    b.pose = BlockPose{half * (2 * unit(rng) - 1), half * (2 * unit(rng) - 1),
                       std::numbers::pi * (2 * unit(rng) - 1), 0.05, 0.05};
    blocks.push_back(b);
  }
  r.world = WorldState(blocks);
  r.anchor = Vec2(half * (2 * unit(rng) - 1), half * (2 * unit(rng) - 1));
  r.model = build_placement_model(
      r.world, r.ws, Action::pick_place("m", TargetKind::kFreePlacement), {},
      r.anchor);
  return r;
}

}  // namespace dlgp::testing
