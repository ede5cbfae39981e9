#pragma once

#include <array>

#include "worldmesh/geom/mesh.hpp"

namespace worldmesh {

struct Obb {
  Vec3 center = Vec3::Zero();
  Mat3 axes = Mat3::Identity();  // columns: orthonormal, right-handed
  Vec3 half_extents = Vec3::Zero();

  Vec3 axis(int i) const { return axes.col(i); }
  // Outward unit normals of the six faces: +a0, -a0, +a1, -a1, +a2, -a2.
  std::array<Vec3, 6> face_normals() const;
  bool contains(const Vec3& p, double eps = 1e-9) const;
};

// PCA of the area-weighted surface covariance, then extent fitting. Degenerate
// eigenspaces (cubes, cylinders, equilateral faces) are resolved with a
// minimum-area rectangle in the ambiguous plane so the result stays
// rotation-equivariant. Throws Error{kEmptyMesh}.
Obb oriented_bounding_box(const TriMesh& mesh);

}  // namespace worldmesh
