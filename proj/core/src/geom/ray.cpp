#include "worldmesh/geom/ray.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace worldmesh {

std::optional<RayHit> intersect_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                                         const Vec3& c) {
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 p = dir.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-15) return std::nullopt;
  const double inv = 1.0 / det;
  const Vec3 s = origin - a;
  const double u = s.dot(p) * inv;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 q = s.cross(e1);
  const double v = dir.dot(q) * inv;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = e2.dot(q) * inv;
  RayHit hit;
  hit.t = t;
  hit.barycentric = Vec3(1.0 - u - v, u, v);
  return hit;
}

std::optional<RayHit> raycast(const TriMesh& mesh, const Vec3& origin, const Vec3& dir) {
  std::optional<RayHit> best;
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    auto hit = intersect_triangle(origin, dir, mesh.corner(f, 0), mesh.corner(f, 1), mesh.corner(f, 2));
    if (!hit || hit->t <= kRayTMin) continue;
    if (!best || hit->t < best->t) {
      hit->face = f;
      best = hit;
    }
  }
  return best;
}

RayCaster::RayCaster(const TriMesh& mesh) : mesh_(&mesh) {
  std::vector<std::uint32_t> faces(mesh.triangles.size());
  std::iota(faces.begin(), faces.end(), 0u);
  build(std::move(faces));
}

RayCaster::RayCaster(const TriMesh& mesh, const std::function<bool(std::size_t)>& face_filter) : mesh_(&mesh) {
  std::vector<std::uint32_t> faces;
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f)
    if (!face_filter || face_filter(f)) faces.push_back(static_cast<std::uint32_t>(f));
  build(std::move(faces));
}

void RayCaster::build(std::vector<std::uint32_t> faces) {
  faces_ = std::move(faces);
  nodes_.clear();
  if (faces_.empty()) return;
  std::vector<Vec3> centroids(mesh_->triangles.size());
  for (std::uint32_t f : faces_) centroids[f] = (mesh_->corner(f, 0) + mesh_->corner(f, 1) + mesh_->corner(f, 2)) / 3.0;
  nodes_.reserve(2 * faces_.size());
  build_node(0, faces_.size(), centroids);
}

std::uint32_t RayCaster::build_node(std::size_t begin, std::size_t end, const std::vector<Vec3>& centroids) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  Aabb3 box, cbox;
  for (std::size_t i = begin; i < end; ++i) {
    box.extend(face_bounds(*mesh_, faces_[i]));
    cbox.extend(centroids[faces_[i]]);
  }
  // Pad so that the slab test never rejects a box whose triangles are hit.
  const Vec3 pad = Vec3::Constant(1e-9) + 1e-9 * box.size();
  box.min -= pad;
  box.max += pad;
  nodes_[index].box = box;
  if (end - begin <= 4) {
    nodes_[index].first = static_cast<std::uint32_t>(begin);
    nodes_[index].count = static_cast<std::uint32_t>(end - begin);
    return index;
  }
  int axis = 0;
  cbox.size().maxCoeff(&axis);
  const std::size_t mid = (begin + end) / 2;
  std::nth_element(faces_.begin() + static_cast<std::ptrdiff_t>(begin), faces_.begin() + static_cast<std::ptrdiff_t>(mid),
                   faces_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::uint32_t a, std::uint32_t b) {
                     if (centroids[a][axis] != centroids[b][axis]) return centroids[a][axis] < centroids[b][axis];
                     return a < b;
                   });
  const std::uint32_t left = build_node(begin, mid, centroids);
  const std::uint32_t right = build_node(mid, end, centroids);
  nodes_[index].left = left;
  nodes_[index].right = right;
  return index;
}

namespace {

bool slab(const Aabb3& box, const Vec3& o, const Vec3& inv_dir, double t_max, double& t_enter) {
  double t0 = 0.0, t1 = t_max;
  for (int i = 0; i < 3; ++i) {
    double a = (box.min[i] - o[i]) * inv_dir[i];
    double b = (box.max[i] - o[i]) * inv_dir[i];
    if (std::isnan(a) || std::isnan(b)) {
      // Ray parallel to the slab and origin on its boundary plane.
      if (o[i] < box.min[i] || o[i] > box.max[i]) return false;
      continue;
    }
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
    if (t0 > t1) return false;
  }
  t_enter = t0;
  return true;
}

}  // namespace

std::optional<RayHit> RayCaster::cast(const Vec3& origin, const Vec3& dir, double t_max) const {
  std::optional<RayHit> best;
  if (nodes_.empty()) return best;
  const Vec3 inv(1.0 / dir.x(), 1.0 / dir.y(), 1.0 / dir.z());
  std::uint32_t stack[128];
  int sp = 0;
  stack[sp++] = 0;
  while (sp > 0) {
    const Node& node = nodes_[stack[--sp]];
    double t_enter = 0;
    const double limit = best ? best->t : t_max;
    if (!slab(node.box, origin, inv, limit, t_enter)) continue;
    if (node.count > 0) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        const std::uint32_t f = faces_[i];
        auto hit = intersect_triangle(origin, dir, mesh_->corner(f, 0), mesh_->corner(f, 1), mesh_->corner(f, 2));
        if (!hit || hit->t <= kRayTMin || hit->t > t_max) continue;
        if (!best || hit->t < best->t || (hit->t == best->t && f < best->face)) {
          hit->face = f;
          best = hit;
        }
      }
      continue;
    }
    stack[sp++] = node.right;
    stack[sp++] = node.left;
  }
  return best;
}

std::optional<ClosestPoint> closest_point(const TriMesh& mesh, const Vec3& p,
                                          const std::function<bool(std::size_t)>& filter) {
  std::optional<ClosestPoint> best;
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    if (filter && !filter(f)) continue;
    Vec3 q = closest_point_on_triangle(p, mesh.corner(f, 0), mesh.corner(f, 1), mesh.corner(f, 2));
    double d = (q - p).norm();
    if (!best || d < best->distance) best = ClosestPoint{q, d, f};
  }
  return best;
}

}  // namespace worldmesh
