#include "dlgp/geometry.hpp"

#include <random>

#include <gtest/gtest.h>

namespace dlgp {
namespace {

constexpr double kPi = std::numbers::pi;

TEST(RotationMatrix, IdentityAndQuarterTurn) {
  EXPECT_TRUE(rotation_matrix(0.0).isApprox(Mat2::Identity()));
  Mat2 quarter;
  quarter << 0, -1, 1, 0;
  EXPECT_TRUE(rotation_matrix(kPi / 2).isApprox(quarter, 1e-15));
}

TEST(RotationMatrix, Orthonormal) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ang(-10.0, 10.0);
  for (int i = 0; i < 100; ++i) {
    const Mat2 r = rotation_matrix(ang(rng));
    EXPECT_TRUE((r.transpose() * r).isApprox(Mat2::Identity(), 1e-14));
    EXPECT_NEAR(r.determinant(), 1.0, 1e-14);
  }
}

TEST(NormalizeAngle, HalfOpenRange) {
  EXPECT_DOUBLE_EQ(normalize_angle(kPi), kPi);
  EXPECT_DOUBLE_EQ(normalize_angle(-kPi), kPi);
  EXPECT_NEAR(normalize_angle(3 * kPi / 2), -kPi / 2, 1e-15);
}

TEST(HalfspacesOfBlock, AxisAlignedAtOrigin) {
  const BlockPose pose{0.0, 0.0, 0.0, 0.05, 0.1};
  const auto hs = halfspaces_of_block(pose, 0.0);
  const double expected_ab[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  for (int i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(hs[i].a, expected_ab[i][0]);
    EXPECT_DOUBLE_EQ(hs[i].b, expected_ab[i][1]);
    EXPECT_DOUBLE_EQ(hs[i].c, 0.05);
  }
}

TEST(HalfspacesOfBlock, ShiftedCenter) {
  const BlockPose pose{0.2, 0.0, 0.0, 0.05, 0.1};
  const auto hs = halfspaces_of_block(pose, 0.0);
  EXPECT_DOUBLE_EQ(hs[0].c, 0.25);
  EXPECT_DOUBLE_EQ(hs[1].c, -0.15);
}

// Membership oracle for a rotated square: transform into the block frame
// directly, without going through the halfspace coefficients.
bool inside_rotated_square(const BlockPose& pose, const Vec2& p, double half) {
  const double c = std::cos(pose.theta);
  const double s = std::sin(pose.theta);
  const double dx = p.x() - pose.x;
  const double dy = p.y() - pose.y;
  const double lx = c * dx + s * dy;
  const double ly = -s * dx + c * dy;
  return std::abs(lx) < half && std::abs(ly) < half;
}

TEST(HalfspacesOfBlock, RotatedInflatedSquareGridOracle) {
  const BlockPose pose{0.1, 0.1, kPi / 4, 0.05, 0.1};
  const double margin = 0.05;
  const double half = pose.size_l / 2 + margin;
  const auto hs = halfspaces_of_block(pose, margin);
  int inside = 0;
  for (int i = -250; i <= 450; ++i) {
    for (int j = -250; j <= 450; ++j) {
      const Vec2 p(i * 1e-3, j * 1e-3);
      const bool oracle = inside_rotated_square(pose, p, half - 1e-12);
      const bool outside_oracle = !inside_rotated_square(pose, p, half + 1e-12);
      int satisfied = 0;
      for (const auto& h : hs) satisfied += h.satisfied(p) ? 1 : 0;
      if (oracle) {
        ++inside;
        EXPECT_EQ(satisfied, 0) << p.transpose();
      }
      if (outside_oracle) EXPECT_GT(satisfied, 0) << p.transpose();
    }
  }
  // Inflated side 0.2 m: area 0.04 m^2, i.e. ~4e4 grid cells.
  EXPECT_NEAR(inside, 40000, 1000);
}

TEST(PointInFootprint, Basics) {
  const BlockPose pose{0.0, 0.0, 0.0, 0.05, 0.1};
  EXPECT_TRUE(point_in_footprint(pose, {0.0, 0.0}, 0.0));
  EXPECT_FALSE(point_in_footprint(pose, {1.0, 1.0}, 0.0));
  // Exactly on c_1: the closed halfspace is satisfied.
  EXPECT_FALSE(point_in_footprint(pose, {0.05, 0.0}, 0.0));
  EXPECT_TRUE(point_in_footprint(pose, {0.05, 0.0}, 0.01));
}

TEST(PointInFootprint, XorWithHalfspacesOnGrid) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  for (int trial = 0; trial < 20; ++trial) {
    const BlockPose pose{u(rng), u(rng), ang(rng), 0.05, 0.05};
    const double margin = 0.025 * (trial % 3);
    const auto hs = halfspaces_of_block(pose, margin);
    for (int i = -40; i <= 40; ++i) {
      for (int j = -40; j <= 40; ++j) {
        const Vec2 p(pose.x + i * 2.5e-3, pose.y + j * 2.5e-3);
        bool any = false;
        for (const auto& h : hs) any = any || h.satisfied(p);
        EXPECT_NE(point_in_footprint(pose, p, margin), any);
      }
    }
  }
}

TEST(HalfspacesOfBlock, InvariantUnderFullTurn) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.4, 0.4);
  for (int trial = 0; trial < 50; ++trial) {
    BlockPose a{u(rng), u(rng), 4 * u(rng), 0.05, 0.05};
    BlockPose b = a;
    b.theta += 2 * kPi;
    const auto ha = halfspaces_of_block(a, 0.02);
    const auto hb = halfspaces_of_block(b, 0.02);
    for (int i = 0; i < 4; ++i) {
      EXPECT_NEAR(ha[i].c, hb[i].c, 1e-12);
      EXPECT_NEAR(ha[i].normal().x(), hb[i].normal().x(), 1e-12);
      EXPECT_NEAR(ha[i].normal().y(), hb[i].normal().y(), 1e-12);
    }
  }
}

TEST(PointInFootprint, InflationMonotone) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  const BlockPose pose{0.01, -0.02, 0.7, 0.05, 0.05};
  for (int i = 0; i < 5000; ++i) {
    const Vec2 p(u(rng), u(rng));
    if (point_in_footprint(pose, p, 0.01)) {
      EXPECT_TRUE(point_in_footprint(pose, p, 0.03));
    }
  }
}

TEST(ReachHalfspaces, SquareApothem) {
  const ReachRegion square{Vec2::Zero(), 0.8, 4};
  EXPECT_NEAR(square.apothem(), 0.8 * std::cos(kPi / 4), 1e-15);
  const auto hs = reach_halfspaces(square);
  ASSERT_EQ(hs.size(), 4u);
  for (const auto& h : hs) EXPECT_NEAR(-h.c, 0.8 * std::cos(kPi / 4), 1e-15);
  EXPECT_TRUE(inside_reach(square, {0.56, 0.0}));
  EXPECT_FALSE(inside_reach(square, {0.58, 0.0}));
}

TEST(ReachHalfspaces, CenterAlwaysInside) {
  for (int sides = 4; sides <= 12; ++sides) {
    const ReachRegion r{Vec2(0.3, -0.2), 0.5, sides};
    EXPECT_TRUE(inside_reach(r, r.center));
  }
}

TEST(ReachHalfspaces, PolygonImpliesCircleRejectionSampling) {
  const ReachRegion r{Vec2(0.1, 0.05), 0.8, 8};
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int accepted = 0;
  for (int i = 0; i < 10000; ++i) {
    const Vec2 p = r.center + Vec2(u(rng), u(rng));
    if (inside_reach(r, p, 0.0)) {
      ++accepted;
      EXPECT_LE((p - r.center).norm(), r.radius + 1e-12);
    }
  }
  // Octagon area 2*sqrt(2)*r^2 out of a 4 m^2 box.
  EXPECT_NEAR(accepted / 10000.0, 2 * std::sqrt(2.0) * 0.64 / 4.0, 0.02);
}

TEST(TableBounds, KeepsBlockOnSurface) {
  const TableBounds t;
  EXPECT_TRUE(t.contains({0.475, 0.0}, 0.05));
  EXPECT_FALSE(t.contains({0.48, 0.0}, 0.05));
}

}  // namespace
}  // namespace dlgp
