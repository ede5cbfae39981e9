#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "worldmesh/error.hpp"
#include "worldmesh/geom/csg.hpp"
#include "worldmesh/geom/obb.hpp"
#include "worldmesh/geom/ray.hpp"

namespace worldmesh {
namespace {

Polygon2D rect(double x0, double y0, double x1, double y1) {
  return Polygon2D({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}});
}

TEST(Polygon, RejectsClockwiseAndSelfIntersecting) {
  EXPECT_THROW(Polygon2D({{0, 0}, {0, 1}, {1, 1}, {1, 0}}), Error);
  EXPECT_THROW(Polygon2D({{0, 0}, {1, 1}, {1, 0}, {0, 1}}), Error);
  EXPECT_THROW(Polygon2D({{0, 0}, {1, 0}}), Error);
}

TEST(Inset, SquareMovesEveryEdgeInward) {
  Polygon2D inner = inset_polygon(rect(0, 0, 4, 4), 0.2);
  ASSERT_EQ(inner.size(), 4u);
  const std::vector<Vec2> expected{{0.2, 0.2}, {3.8, 0.2}, {3.8, 3.8}, {0.2, 3.8}};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR((inner[i] - expected[i]).norm(), 0.0, 1e-12);
  EXPECT_NEAR(inner.area(), 3.6 * 3.6, 1e-12);
}

TEST(Inset, TinyOffsetIsIdentity) {
  Polygon2D l({{0, 0}, {3, 0}, {3, 1}, {1, 1}, {1, 2.5}, {0, 2.5}});
  Polygon2D inner = inset_polygon(l, 1e-12);
  ASSERT_EQ(inner.size(), l.size());
  for (std::size_t i = 0; i < l.size(); ++i) EXPECT_LT((inner[i] - l[i]).norm(), 1e-9);
}

TEST(Inset, CollapseWhenOffsetExceedsHalfWidth) {
  try {
    inset_polygon(rect(0, 0, 1, 1), 0.6);
    FAIL() << "expected InsetCollapse";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsetCollapse);
  }
}

TEST(Inset, AreaStrictlyDecreasesAndComposes) {
  Polygon2D hexagon({{0, 0}, {2, -1}, {4, 0}, {4, 2}, {2, 3}, {0, 2}});
  double prev = hexagon.area();
  for (double d : {0.05, 0.1, 0.2, 0.4}) {
    double a = inset_polygon(hexagon, d).area();
    EXPECT_LT(a, prev);
    prev = a;
  }
  // For convex polygons, inset(inset(P, a), b) == inset(P, a + b) vertexwise.
  Polygon2D twice = inset_polygon(inset_polygon(hexagon, 0.1), 0.15);
  Polygon2D once = inset_polygon(hexagon, 0.25);
  ASSERT_EQ(twice.size(), once.size());
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_LT((twice[i] - once[i]).norm(), 1e-6);
}

TEST(Inset, PerEdgeStepBetweenCollinearEdges) {
  // Bottom edge split in two collinear pieces with different offsets.
  Polygon2D p({{0, 0}, {2, 0}, {4, 0}, {4, 4}, {0, 4}});
  std::vector<double> d{0.1, 0.2, 0.2, 0.2, 0.2};
  InsetEdges e = inset_edges(p, d);
  EXPECT_NEAR(e.inner[0][1].y(), 0.1, 1e-12);
  EXPECT_NEAR(e.inner[1][0].y(), 0.2, 1e-12);
  EXPECT_NEAR(signed_area(e.polygon), 3.6 * 3.6 + 1.8 * 0.1, 1e-12);
}

TEST(Triangulate, LShapeAreaPreserved) {
  std::vector<Vec2> l{{0, 0}, {3, 0}, {3, 1}, {2, 1}, {1, 1}, {1, 2.5}, {0, 2.5}};
  double area = 0;
  for (const auto& t : triangulate(l)) area += signed_area(std::vector<Vec2>{l[t[0]], l[t[1]], l[t[2]]});
  EXPECT_NEAR(area, signed_area(l), 1e-12);
}

TEST(IntersectionArea, OverlappingRectangles) {
  EXPECT_NEAR(intersection_area(rect(0, 0, 2, 2), rect(1, 1, 3, 3)), 1.0, 1e-12);
  EXPECT_NEAR(intersection_area(rect(0, 0, 2, 2), rect(2, 0, 4, 2)), 0.0, 1e-12);
}

TEST(ConvexHull, RepeatedAndDoublyWoundPoints) {
  const std::vector<Vec2> sq{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  std::vector<Vec2> twice = sq, paired;
  twice.insert(twice.end(), sq.begin(), sq.end());
  for (const Vec2& p : sq) paired.insert(paired.end(), {p, p});
  std::vector<Vec2> jittered = paired;
  for (std::size_t i = 0; i < jittered.size(); i += 2) jittered[i] += Vec2(-1e-14, 3e-15);
  for (const auto& pts : {twice, paired, jittered}) {
    auto hull = convex_hull(pts);
    ASSERT_EQ(hull.size(), 4u);
    double area = 0;
    for (std::size_t i = 0; i < 4; ++i) area += hull[i].x() * hull[(i + 1) % 4].y() - hull[(i + 1) % 4].x() * hull[i].y();
    EXPECT_NEAR(area / 2, 1.0, 1e-12);
  }
  EXPECT_EQ(convex_hull(sq), sq);
}

TEST(CollinearOverlap, ToleranceAndLength) {
  auto o = collinear_overlap({0, 0}, {4, 0}, {5, 0.005}, {3, 0.005}, 0.01, 0.1);
  ASSERT_TRUE(o);
  EXPECT_NEAR(o->length(), 1.0, 1e-12);
  EXPECT_FALSE(collinear_overlap({0, 0}, {4, 0}, {4, 0.02}, {0, 0.02}, 0.01, 0.1));
}

// ---- mesh_subtract ----------------------------------------------------------

TEST(MeshSubtract, DisjointCutterLeavesBaseUnchanged) {
  TriMesh base = make_box({0, 0, 0}, {1, 1, 1});
  TriMesh out = mesh_subtract(base, make_box({2, 2, 2}, {3, 3, 3}));
  EXPECT_EQ(out, base);
}

TEST(MeshSubtract, CubeMinusCenteredCube) {
  TriMesh out = mesh_subtract(make_box({0, 0, 0}, {1, 1, 1}), make_box({0.25, 0.25, 0.25}, {0.75, 0.75, 0.75}));
  EXPECT_NEAR(signed_volume(out), 0.875, 1e-9);
  out.validate();
}

TEST(MeshSubtract, DoorThroughWallSlabFlushWithFloor) {
  TriMesh wall = make_box({0, 0, 0}, {4, 0.1, 2.6});
  TriMesh door = make_box({1.0, -0.05, 0.0}, {1.9, 0.15, 2.1});
  TriMesh out = mesh_subtract(wall, door);
  EXPECT_NEAR(signed_volume(out), 0.851, 1e-9);
  // A ray through the opening meets nothing.
  EXPECT_FALSE(raycast(out, {1.45, -1.0, 1.0}, {0, 1, 0}));
  EXPECT_TRUE(raycast(out, {0.5, -1.0, 1.0}, {0, 1, 0}));
  out.validate();
}

TEST(MeshSubtract, CornerAndOverhangingCuts) {
  // Cutter overlapping a corner: removed volume = overlap box.
  TriMesh out = mesh_subtract(make_box({0, 0, 0}, {1, 1, 1}), make_box({0.5, 0.5, 0.5}, {2, 2, 2}));
  EXPECT_NEAR(signed_volume(out), 1.0 - 0.125, 1e-9);
  // Cutter sharing a full face with the base removes a slice.
  out = mesh_subtract(make_box({0, 0, 0}, {1, 1, 1}), make_box({0, 0, 0.8}, {1, 1, 1}));
  EXPECT_NEAR(signed_volume(out), 0.8, 1e-9);
  // Rotated cutter through a slab.
  Mat3 r = Eigen::AngleAxisd(0.4, Vec3::UnitZ()).toRotationMatrix();
  TriMesh slab = make_box({-2, -2, 0}, {2, 2, 0.5});
  TriMesh cutter = make_oriented_box({0, 0, 0.25}, r, {0.5, 0.3, 1.0});
  out = mesh_subtract(slab, cutter);
  EXPECT_NEAR(signed_volume(out), 8.0 - 1.0 * 0.6 * 0.5, 1e-9);
}

TEST(MeshSubtract, TouchingCutterOutsideKeepsVolume) {
  TriMesh base = make_box({0, 0, 0}, {1, 1, 1});
  TriMesh out = mesh_subtract(base, make_box({0.2, 0.2, 1.0}, {0.8, 0.8, 1.5}));
  EXPECT_NEAR(signed_volume(out), 1.0, 1e-9);
}

TEST(MeshSubtract, SequentialCutsAndTagInheritance) {
  TriMesh wall = make_box({0, 0, 0}, {4, 0.2, 2.6}, FaceTag{"a", Category::kWall, ""});
  TriMesh out = mesh_subtract(wall, make_box({0.5, -0.1, 0}, {1.4, 0.3, 2.1}));
  out = mesh_subtract(out, make_box({2.5, -0.1, 0.9}, {3.5, 0.3, 2.0}));
  EXPECT_NEAR(signed_volume(out), 4 * 0.2 * 2.6 - 0.9 * 0.2 * 2.1 - 1.0 * 0.2 * 1.1, 1e-9);
  for (std::size_t f = 0; f < out.triangle_count(); ++f) EXPECT_EQ(out.tag_of(f).room_id, "a");
}

TEST(MeshSubtract, CutThroughTwoAbuttingSolidsSplitsTags) {
  TriMesh merged = make_box({0, 0, 0}, {4, 0.1, 2.6}, FaceTag{"a", Category::kWall, ""});
  merged.append(make_box({0, 0.1, 0}, {4, 0.2, 2.6}, FaceTag{"b", Category::kWall, ""}));
  TriMesh out = mesh_subtract(merged, make_box({1.0, -0.001, 0}, {1.9, 0.201, 2.1}));
  EXPECT_NEAR(signed_volume(out), 4 * 0.2 * 2.6 - 0.9 * 0.2 * 2.1, 1e-9);
  EXPECT_FALSE(raycast(out, {1.45, -1.0, 1.0}, {0, 1, 0}));
  double vol_a = 0, vol_b = 0;
  for (std::size_t f = 0; f < out.triangle_count(); ++f) {
    double v = out.corner(f, 0).dot(out.corner(f, 1).cross(out.corner(f, 2))) / 6.0;
    (out.tag_of(f).room_id == "a" ? vol_a : vol_b) += v;
  }
  EXPECT_NEAR(vol_a, 4 * 0.1 * 2.6 - 0.9 * 0.1 * 2.1, 1e-9);
  EXPECT_NEAR(vol_b, 4 * 0.1 * 2.6 - 0.9 * 0.1 * 2.1, 1e-9);
}

TEST(MeshSubtract, NonManifoldBaseIsRejected) {
  TriMesh base = make_box({0, 0, 0}, {1, 1, 1});
  // Fin sharing an existing edge: that edge now has three faces.
  const Triangle& t = base.triangles[0];
  std::uint32_t extra = base.add_vertex({0.5, 0.5, -1});
  base.add_triangle(t[0], t[1], extra, 0);
  try {
    mesh_subtract(base, make_box({-0.5, -0.5, -0.5}, {1.5, 1.5, 0.5}));
    FAIL() << "expected NonManifoldInput";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonManifoldInput);
  }
}

// ---- oriented_bounding_box ---------------------------------------------------

void expect_extents_perm(const Vec3& got, Vec3 want, double tol) {
  Vec3 g = got;
  std::sort(g.data(), g.data() + 3);
  std::sort(want.data(), want.data() + 3);
  EXPECT_LT((g - want).norm(), tol) << g.transpose();
}

TEST(Obb, UnitCube) {
  Obb obb = oriented_bounding_box(make_box({0, 0, 0}, {1, 1, 1}));
  EXPECT_LT((obb.center - Vec3(0.5, 0.5, 0.5)).norm(), 1e-12);
  expect_extents_perm(obb.half_extents, {0.5, 0.5, 0.5}, 1e-9);
  EXPECT_NEAR(obb.axes.determinant(), 1.0, 1e-9);
}

TEST(Obb, RotatedCubeKeepsExtents) {
  Mat3 r = Eigen::AngleAxisd(std::numbers::pi / 6, Vec3::UnitZ()).toRotationMatrix();
  Obb obb = oriented_bounding_box(make_oriented_box({1, 2, 3}, r, {0.5, 0.5, 0.5}));
  expect_extents_perm(obb.half_extents, {0.5, 0.5, 0.5}, 1e-9);
  // Every OBB axis is parallel to a rotated cube axis.
  for (int i = 0; i < 3; ++i) {
    double best = 0;
    for (int j = 0; j < 3; ++j) best = std::max(best, std::abs(obb.axis(i).dot(r.col(j))));
    EXPECT_NEAR(best, 1.0, 1e-9);
  }
}

TEST(Obb, SquareFootprintBox) {
  Obb o = oriented_bounding_box(make_box({2.9, 1.25, 0.05}, {3.4, 1.75, 0.95}));
  Vec3 sorted = o.half_extents;
  std::sort(sorted.data(), sorted.data() + 3);
  EXPECT_NEAR(sorted.x(), 0.25, 1e-9);
  EXPECT_NEAR(sorted.y(), 0.25, 1e-9);
  EXPECT_NEAR(sorted.z(), 0.45, 1e-9);
}

TEST(Obb, PlanarTriangleHasZeroExtent) {
  TriMesh m;
  m.intern_tag({});
  m.add_vertex({0, 0, 0});
  m.add_vertex({2, 0, 0});
  m.add_vertex({0.3, 1, 0});
  m.add_triangle(0, 1, 2, 0);
  Obb obb = oriented_bounding_box(m);
  EXPECT_NEAR(obb.half_extents.minCoeff(), 0.0, 1e-9);
}

TEST(Obb, EmptyMeshThrows) {
  try {
    oriented_bounding_box(TriMesh{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyMesh);
  }
}

TEST(Obb, RotationEquivariance) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1, 1);
  TriMesh box = make_oriented_box({0.2, -0.4, 1.0}, Mat3::Identity(), {0.9, 0.4, 0.15});
  Obb ref = oriented_bounding_box(box);
  for (int trial = 0; trial < 20; ++trial) {
    Quat q(u(rng), u(rng), u(rng), u(rng));
    q.normalize();
    Eigen::Isometry3d xf = Eigen::Isometry3d::Identity();
    xf.linear() = q.toRotationMatrix();
    Obb got = oriented_bounding_box(transformed(box, xf));
    expect_extents_perm(got.half_extents, ref.half_extents, 1e-6);
    EXPECT_LT((got.center - xf * ref.center).norm(), 1e-6);
    for (int i = 0; i < 3; ++i) {
      double best = 0;
      for (int j = 0; j < 3; ++j) best = std::max(best, std::abs(got.axis(i).dot(q * ref.axis(j))));
      EXPECT_NEAR(best, 1.0, 1e-6);
    }
  }
}

// ---- raycast -----------------------------------------------------------------

TEST(Raycast, AxisAlignedPlaneHit) {
  TriMesh plane;
  plane.intern_tag({});
  for (Vec3 p : {Vec3(-5, -5, 2), Vec3(5, -5, 2), Vec3(5, 5, 2), Vec3(-5, 5, 2)}) plane.add_vertex(p);
  plane.add_triangle(0, 1, 2, 0);
  plane.add_triangle(0, 2, 3, 0);
  auto hit = raycast(plane, {0, 0, 0}, {0, 0, 1});
  ASSERT_TRUE(hit);
  EXPECT_DOUBLE_EQ(hit->t, 2.0);
  EXPECT_FALSE(raycast(plane, {0, 0, 3}, {1, 0, 0}));
}

TEST(Raycast, CubeCenterHitsNearestFace) {
  TriMesh cube = make_box({0, 0, 0}, {1, 1, 1});
  Vec3 dir = Vec3(0.3, 0.2, 0.9).normalized();
  auto hit = raycast(cube, {0.5, 0.5, 0.5}, dir);
  ASSERT_TRUE(hit);
  // Slab exit: the smallest positive distance to a face plane along dir.
  double t = std::min({0.5 / dir.x(), 0.5 / dir.y(), 0.5 / dir.z()});
  EXPECT_NEAR(hit->t, t, 1e-9);
}

TEST(Raycast, BvhMatchesExhaustiveLoop) {
  TriMesh scene = make_box({0, 0, 0}, {4, 3, 2.5});
  scene.append(make_box({1, 1, 0}, {1.5, 1.5, 0.8}));
  scene.append(make_oriented_box({2.5, 2, 1}, Eigen::AngleAxisd(0.7, Vec3::UnitZ()).toRotationMatrix(), {0.3, 0.2, 0.5}));
  RayCaster caster(scene);
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 2000; ++i) {
    Vec3 o(2 + 1.9 * u(rng), 1.5 + 1.4 * u(rng), 1.25 + 1.2 * u(rng));
    Vec3 d = Vec3(u(rng), u(rng), u(rng)).normalized();
    auto a = caster.cast(o, d);
    auto b = raycast(scene, o, d);
    ASSERT_EQ(a.has_value(), b.has_value());
    if (a) {
      EXPECT_EQ(a->t, b->t);
      EXPECT_EQ(a->face, b->face);
    }
  }
}

TEST(WindingNumber, InsideOutside) {
  TriMesh cube = make_box({0, 0, 0}, {1, 1, 1});
  EXPECT_NEAR(winding_number(cube, {0.5, 0.5, 0.5}), 1.0, 1e-9);
  EXPECT_NEAR(winding_number(cube, {1.5, 0.5, 0.5}), 0.0, 1e-9);
}

}  // namespace
}  // namespace worldmesh
