#pragma once

// Planar geometry for square blocks on a table: SE(2) poses, the four
// halfspaces surrounding a block footprint, and the polygonal reach region.

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

namespace dlgp {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Wraps an angle into (-pi, pi].
inline double normalize_angle(double theta) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double t = std::fmod(theta, kTwoPi);
  if (t <= -std::numbers::pi) t += kTwoPi;
  if (t > std::numbers::pi) t -= kTwoPi;
  return t;
}

struct BlockPose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double height = 0.05;
  double size_l = 0.05;

  Vec2 center() const { return {x, y}; }
};

inline Mat2 rotation_matrix(double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Mat2 r;
  r << c, -s, s, c;
  return r;
}

// A closed halfspace  [a b] * R(frame_theta)^T * p >= c.
struct Halfspace {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double frame_theta = 0.0;

  // Coefficients of the same constraint written in world coordinates.
  Vec2 normal() const { return rotation_matrix(frame_theta) * Vec2(a, b); }

  double value(const Vec2& p) const { return normal().dot(p); }

  bool satisfied(const Vec2& p, double tol = 0.0) const {
    return value(p) >= c - tol;
  }
};

/// The four halfspaces whose disjunction is the exterior of the block's
/// footprint inflated by `margin`. Order: +x, -x, +y, -y in the block frame.
inline std::array<Halfspace, 4> halfspaces_of_block(const BlockPose& pose,
                                                    double margin) {
  const double theta = normalize_angle(pose.theta);
  // [x_b y_b] = [x y] R(theta), i.e. the center expressed in the block frame.
  const Vec2 local = rotation_matrix(theta).transpose() * pose.center();
  const double half = pose.size_l / 2.0 + margin;
  return {{
      {1.0, 0.0, half + local.x(), theta},
      {-1.0, 0.0, half - local.x(), theta},
      {0.0, 1.0, half + local.y(), theta},
      {0.0, -1.0, half - local.y(), theta},
  }};
}

/// True iff `point` violates all four halfspaces, i.e. lies strictly inside
/// the inflated footprint.
inline bool point_in_footprint(const BlockPose& pose, const Vec2& point,
                               double margin) {
  for (const Halfspace& h : halfspaces_of_block(pose, margin)) {
    if (h.satisfied(point)) return false;
  }
  return true;
}

// Circle of reachable placements, linearized by an inscribed regular polygon.
struct ReachRegion {
  Vec2 center = Vec2::Zero();
  double radius = 0.8;
  int polygon_sides = 8;

  double apothem() const {
    return radius * std::cos(std::numbers::pi / polygon_sides);
  }
};

/// Conjunction of the returned halfspaces is the inscribed regular polygon.
/// Face k has its outward normal at angle 2*pi*k/sides.
inline std::vector<Halfspace> reach_halfspaces(const ReachRegion& region) {
  std::vector<Halfspace> out;
  out.reserve(static_cast<std::size_t>(region.polygon_sides));
  const double apothem = region.apothem();
  for (int k = 0; k < region.polygon_sides; ++k) {
    const double phi = 2.0 * std::numbers::pi * k / region.polygon_sides;
    const Vec2 n(std::cos(phi), std::sin(phi));
    // -n . p >= -(apothem + n . center)
    out.push_back({-1.0, 0.0, -(apothem + n.dot(region.center)), phi});
  }
  return out;
}

inline bool inside_reach(const ReachRegion& region, const Vec2& p,
                         double tol = 1e-9) {
  for (const Halfspace& h : reach_halfspaces(region)) {
    if (!h.satisfied(p, tol)) return false;
  }
  return true;
}

// Axis-aligned rectangle of the table surface.
struct TableBounds {
  double x_min = -0.5;
  double x_max = 0.5;
  double y_min = -0.5;
  double y_max = 0.5;

  double diagonal() const { return std::hypot(x_max - x_min, y_max - y_min); }

  /// Halfspaces keeping a block of side `l` entirely on the table.
  std::vector<Halfspace> halfspaces(double l) const {
    const double h = l / 2.0;
    return {{1.0, 0.0, x_min + h, 0.0},
            {-1.0, 0.0, -(x_max - h), 0.0},
            {0.0, 1.0, y_min + h, 0.0},
            {0.0, -1.0, -(y_max - h), 0.0}};
  }

  bool contains(const Vec2& p, double l, double tol = 1e-9) const {
    for (const Halfspace& h : halfspaces(l)) {
      if (!h.satisfied(p, tol)) return false;
    }
    return true;
  }
};

}  // namespace dlgp
