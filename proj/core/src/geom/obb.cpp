#include "worldmesh/geom/obb.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "worldmesh/error.hpp"

namespace worldmesh {

std::array<Vec3, 6> Obb::face_normals() const {
  return {axis(0), Vec3(-axis(0)), axis(1), Vec3(-axis(1)), axis(2), Vec3(-axis(2))};
}

bool Obb::contains(const Vec3& p, double eps) const {
  Vec3 local = axes.transpose() * (p - center);
  return (local.cwiseAbs().array() <= half_extents.array() + eps).all();
}

namespace {

std::vector<Vec3> used_vertices(const TriMesh& mesh) {
  std::vector<char> used(mesh.vertices.size(), 0);
  std::vector<Vec3> pts;
  for (const Triangle& t : mesh.triangles)
    for (std::uint32_t v : t)
      if (!used[v]) {
        used[v] = 1;
        pts.push_back(mesh.vertices[v]);
      }
  return pts;
}

// In-plane axes (u, v) of the minimum-area rectangle of the points projected
// onto the plane orthogonal to `normal`.
std::pair<Vec3, Vec3> plane_rect_axes(const std::vector<Vec3>& pts, const Vec3& normal) {
  Vec3 e0 = std::abs(normal.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  Vec3 b0 = (e0 - normal * normal.dot(e0)).normalized();
  Vec3 b1 = normal.cross(b0);
  std::vector<Vec2> flat;
  flat.reserve(pts.size());
  for (const Vec3& p : pts) flat.emplace_back(p.dot(b0), p.dot(b1));
  std::vector<Vec2> hull = convex_hull(flat);
  if (hull.size() < 3) {
    // Collinear projection: align with the spread direction.
    Vec2 lo = flat.front(), hi = flat.front();
    double best = -1;
    for (const Vec2& a : flat)
      for (const Vec2& b : flat)
        if ((a - b).squaredNorm() > best) {
          best = (a - b).squaredNorm();
          lo = a;
          hi = b;
        }
    Vec2 d = best > 0 ? Vec2((hi - lo).normalized()) : Vec2(1, 0);
    Vec3 u = (b0 * d.x() + b1 * d.y()).normalized();
    return {u, normal.cross(u)};
  }
  Rect2 r = min_area_rect(hull);
  Vec2 d = (r.corners[1] - r.corners[0]).normalized();
  Vec3 u = (b0 * d.x() + b1 * d.y()).normalized();
  return {u, normal.cross(u)};
}

bool nearly_equal(double a, double b, double scale) { return std::abs(a - b) <= 1e-6 * std::max(scale, 1e-30); }

}  // namespace

Obb oriented_bounding_box(const TriMesh& mesh) {
  if (mesh.triangles.empty()) throw Error(ErrorCode::kEmptyMesh, "oriented_bounding_box needs at least one triangle");
  const std::vector<Vec3> pts = used_vertices(mesh);

  // Second moments of the surface, uniform density per unit area.
  double total_area = 0.0;
  Vec3 mean = Vec3::Zero();
  Mat3 second = Mat3::Zero();
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    const Vec3 a = mesh.corner(f, 0), b = mesh.corner(f, 1), c = mesh.corner(f, 2);
    const double area = triangle_area(a, b, c);
    const Vec3 m = (a + b + c) / 3.0;
    total_area += area;
    mean += area * m;
    second += (area / 12.0) * (9.0 * m * m.transpose() + a * a.transpose() + b * b.transpose() + c * c.transpose());
  }
  Mat3 cov;
  if (total_area > 0) {
    mean /= total_area;
    cov = second / total_area - mean * mean.transpose();
  } else {
    mean = Vec3::Zero();
    for (const Vec3& p : pts) mean += p;
    mean /= static_cast<double>(pts.size());
    cov = Mat3::Zero();
    for (const Vec3& p : pts) cov += (p - mean) * (p - mean).transpose();
    cov /= static_cast<double>(pts.size());
  }

  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  Vec3 ev = eig.eigenvalues();  // ascending
  Mat3 vecs = eig.eigenvectors();
  const double scale = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);

  Mat3 axes;
  const bool eq01 = nearly_equal(ev(0), ev(1), scale);
  const bool eq12 = nearly_equal(ev(1), ev(2), scale);
  if (eq01 && eq12) {
    // Isotropic: anchor on the normal of the largest face (lowest index on ties).
    std::size_t best = 0;
    double best_area = -1;
    for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
      double a = mesh.face_area(f);
      if (a > best_area * (1 + 1e-9)) {
        best_area = a;
        best = f;
      }
    }
    Vec3 n = mesh.face_normal(best);
    if (n.squaredNorm() == 0) n = Vec3::UnitZ();
    auto [u, v] = plane_rect_axes(pts, n);
    axes.col(0) = u;
    axes.col(1) = v;
    axes.col(2) = n;
  } else if (eq01 || eq12) {
    const Vec3 unique = eq01 ? Vec3(vecs.col(2)) : Vec3(vecs.col(0));
    auto [u, v] = plane_rect_axes(pts, unique.normalized());
    axes.col(0) = u;
    axes.col(1) = v;
    axes.col(2) = unique.normalized();
  } else {
    axes = vecs;
  }
  // Orthonormalize and make right-handed.
  axes.col(0).normalize();
  axes.col(1) = (axes.col(1) - axes.col(0) * axes.col(0).dot(axes.col(1))).normalized();
  axes.col(2) = axes.col(0).cross(axes.col(1));

  Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
  for (const Vec3& p : pts) {
    Vec3 local = axes.transpose() * p;
    lo = lo.cwiseMin(local);
    hi = hi.cwiseMax(local);
  }
  Obb obb;
  obb.axes = axes;
  obb.half_extents = 0.5 * (hi - lo);
  obb.center = axes * (0.5 * (hi + lo));
  return obb;
}

}  // namespace worldmesh
