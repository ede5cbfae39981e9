#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "worldmesh/geom/mesh.hpp"

namespace worldmesh {

struct RayHit {
  double t = 0.0;
  std::size_t face = 0;
  Vec3 barycentric = Vec3::Zero();  // weights of corners 0, 1, 2
};

// Minimum accepted hit distance.
inline constexpr double kRayTMin = 1e-6;

// Moller-Trumbore; returns t and barycentrics, edges inclusive, no culling.
std::optional<RayHit> intersect_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                                         const Vec3& c);

// Nearest hit with t > kRayTMin by exhaustive loop (ties resolved to the lower
// face index). `dir` must be unit length within 1e-9.
std::optional<RayHit> raycast(const TriMesh& mesh, const Vec3& origin, const Vec3& dir);

// BVH accelerated caster over a (possibly filtered) face subset of a mesh. The
// mesh must outlive the caster. Results are identical to `raycast` restricted
// to the same faces, including tie-breaking.
class RayCaster {
 public:
  explicit RayCaster(const TriMesh& mesh);
  RayCaster(const TriMesh& mesh, const std::function<bool(std::size_t)>& face_filter);

  std::optional<RayHit> cast(const Vec3& origin, const Vec3& dir, double t_max = std::numeric_limits<double>::infinity()) const;
  const TriMesh& mesh() const { return *mesh_; }

 private:
  struct Node {
    Aabb3 box;
    std::uint32_t left = 0, right = 0;  // children when count == 0
    std::uint32_t first = 0, count = 0;
  };
  void build(std::vector<std::uint32_t> faces);
  std::uint32_t build_node(std::size_t begin, std::size_t end, const std::vector<Vec3>& centroids);

  const TriMesh* mesh_;
  std::vector<std::uint32_t> faces_;
  std::vector<Node> nodes_;
};

// Closest surface point over faces accepted by `filter` (all when empty).
struct ClosestPoint {
  Vec3 point;
  double distance = std::numeric_limits<double>::infinity();
  std::size_t face = 0;
};
std::optional<ClosestPoint> closest_point(const TriMesh& mesh, const Vec3& p,
                                          const std::function<bool(std::size_t)>& filter = {});

}  // namespace worldmesh
