#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "worldmesh/geom/polygon.hpp"
#include "worldmesh/geom/types.hpp"

namespace worldmesh {

enum class Category : std::uint8_t { kWall = 0, kFloor = 1, kCeiling = 2, kObject = 3 };

std::string_view to_string(Category c);
Category category_from_string(std::string_view s);

struct FaceTag {
  std::string room_id;
  Category category = Category::kWall;
  std::string object_id;  // empty for structural faces

  auto operator<=>(const FaceTag&) const = default;
};

using Triangle = std::array<std::uint32_t, 3>;

// Indexed triangle soup with per-face tags. Tags are interned: face_tag[f]
// indexes into `tags`. `uvs` is either empty or parallel to `vertices`.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::vector<std::uint32_t> face_tag;
  std::vector<FaceTag> tags;
  std::vector<Vec2> uvs;

  bool empty() const { return triangles.empty(); }
  std::size_t triangle_count() const { return triangles.size(); }
  bool has_uvs() const { return !uvs.empty(); }

  std::uint32_t intern_tag(const FaceTag& tag);
  std::uint32_t add_vertex(const Vec3& p);
  void add_triangle(std::uint32_t a, std::uint32_t b, std::uint32_t c, std::uint32_t tag);
  const FaceTag& tag_of(std::size_t face) const { return tags[face_tag[face]]; }

  Vec3 corner(std::size_t face, int k) const { return vertices[triangles[face][k]]; }
  Vec3 face_normal(std::size_t face) const;  // unit, right-handed winding
  double face_area(std::size_t face) const;

  // Appends `other`, remapping tags by value. Vertices are not welded.
  void append(const TriMesh& other);

  // Throws Error{kInvariantError} on out-of-range indices, degenerate faces or
  // missing tags.
  void validate() const;

  bool operator==(const TriMesh&) const = default;
};

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);
double signed_volume(const TriMesh& mesh);
double surface_area(const TriMesh& mesh);
Aabb3 bounds(const TriMesh& mesh);
Aabb3 face_bounds(const TriMesh& mesh, std::size_t face);

// Keeps only the faces for which `keep(face)` holds; unused vertices dropped.
template <class Pred>
TriMesh filter_faces(const TriMesh& mesh, Pred keep);

TriMesh transformed(const TriMesh& mesh, const Eigen::Isometry3d& xf);
TriMesh translated(const TriMesh& mesh, const Vec3& offset);
// Merges vertices whose positions (and uvs, when present) agree within eps.
TriMesh weld_vertices(const TriMesh& mesh, double eps = 1e-6);

// Closed axis-aligned box with outward-facing triangles.
TriMesh make_box(const Vec3& min, const Vec3& max, const FaceTag& tag = {});
// Closed oriented box: center, unit axes (columns) and half extents.
TriMesh make_oriented_box(const Vec3& center, const Mat3& axes, const Vec3& half_extents, const FaceTag& tag = {});
// Closed prism over a CCW polygon between z0 < z1.
TriMesh extrude_polygon(const Polygon2D& poly, double z0, double z1, const FaceTag& tag = {});

// Generalized winding number of a closed surface around p (1 inside, 0 outside).
double winding_number(const TriMesh& mesh, const Vec3& p);

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

// ---- template implementation -------------------------------------------------

template <class Pred>
TriMesh filter_faces(const TriMesh& mesh, Pred keep) {
  TriMesh out;
  std::vector<std::int64_t> remap(mesh.vertices.size(), -1);
  std::vector<std::int64_t> tag_remap(mesh.tags.size(), -1);
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    if (!keep(f)) continue;
    Triangle t{};
    for (int k = 0; k < 3; ++k) {
      std::uint32_t v = mesh.triangles[f][k];
      if (remap[v] < 0) {
        remap[v] = static_cast<std::int64_t>(out.vertices.size());
        out.vertices.push_back(mesh.vertices[v]);
        if (mesh.has_uvs()) out.uvs.push_back(mesh.uvs[v]);
      }
      t[k] = static_cast<std::uint32_t>(remap[v]);
    }
    std::uint32_t tag = mesh.face_tag[f];
    if (tag_remap[tag] < 0) tag_remap[tag] = out.intern_tag(mesh.tags[tag]);
    out.triangles.push_back(t);
    out.face_tag.push_back(static_cast<std::uint32_t>(tag_remap[tag]));
  }
  return out;
}

}  // namespace worldmesh
