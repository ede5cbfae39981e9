#include "worldmesh/geom/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include "worldmesh/error.hpp"

namespace worldmesh {

std::string_view to_string(Category c) {
  switch (c) {
    case Category::kWall: return "wall";
    case Category::kFloor: return "floor";
    case Category::kCeiling: return "ceiling";
    case Category::kObject: return "object";
  }
  return "wall";
}

Category category_from_string(std::string_view s) {
  if (s == "wall") return Category::kWall;
  if (s == "floor") return Category::kFloor;
  if (s == "ceiling") return Category::kCeiling;
  if (s == "object") return Category::kObject;
  throw Error(ErrorCode::kSchemaError, "unknown face category '" + std::string(s) + "'");
}

std::uint32_t TriMesh::intern_tag(const FaceTag& tag) {
  for (std::size_t i = 0; i < tags.size(); ++i)
    if (tags[i] == tag) return static_cast<std::uint32_t>(i);
  tags.push_back(tag);
  return static_cast<std::uint32_t>(tags.size() - 1);
}

std::uint32_t TriMesh::add_vertex(const Vec3& p) {
  vertices.push_back(p);
  return static_cast<std::uint32_t>(vertices.size() - 1);
}

void TriMesh::add_triangle(std::uint32_t a, std::uint32_t b, std::uint32_t c, std::uint32_t tag) {
  triangles.push_back({a, b, c});
  face_tag.push_back(tag);
}

Vec3 TriMesh::face_normal(std::size_t face) const {
  Vec3 n = (corner(face, 1) - corner(face, 0)).cross(corner(face, 2) - corner(face, 0));
  double len = n.norm();
  return len > 0 ? Vec3(n / len) : Vec3::Zero();
}

double TriMesh::face_area(std::size_t face) const { return triangle_area(corner(face, 0), corner(face, 1), corner(face, 2)); }

void TriMesh::append(const TriMesh& other) {
  const auto base = static_cast<std::uint32_t>(vertices.size());
  const bool uv_here = has_uvs() || (vertices.empty() && other.has_uvs());
  if (uv_here && !has_uvs()) uvs.assign(vertices.size(), Vec2(std::nan(""), std::nan("")));
  vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
  if (uv_here) {
    if (other.has_uvs())
      uvs.insert(uvs.end(), other.uvs.begin(), other.uvs.end());
    else
      uvs.resize(vertices.size(), Vec2(std::nan(""), std::nan("")));
  } else if (other.has_uvs()) {
    uvs.assign(base, Vec2(std::nan(""), std::nan("")));
    uvs.insert(uvs.end(), other.uvs.begin(), other.uvs.end());
  }
  std::vector<std::uint32_t> tag_map(other.tags.size());
  for (std::size_t i = 0; i < other.tags.size(); ++i) tag_map[i] = intern_tag(other.tags[i]);
  for (std::size_t f = 0; f < other.triangles.size(); ++f) {
    const Triangle& t = other.triangles[f];
    add_triangle(t[0] + base, t[1] + base, t[2] + base, tag_map[other.face_tag[f]]);
  }
}

void TriMesh::validate() const {
  if (face_tag.size() != triangles.size()) throw Error(ErrorCode::kInvariantError, "face tag count mismatch");
  if (has_uvs() && uvs.size() != vertices.size()) throw Error(ErrorCode::kInvariantError, "uv count mismatch");
  for (std::size_t f = 0; f < triangles.size(); ++f) {
    for (std::uint32_t v : triangles[f])
      if (v >= vertices.size()) throw Error(ErrorCode::kInvariantError, "triangle index out of range at face " + std::to_string(f));
    if (face_tag[f] >= tags.size()) throw Error(ErrorCode::kInvariantError, "face tag out of range");
    if (face_area(f) <= 1e-12) throw Error(ErrorCode::kInvariantError, "degenerate triangle at face " + std::to_string(f));
  }
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) { return 0.5 * (b - a).cross(c - a).norm(); }

double signed_volume(const TriMesh& mesh) {
  double v = 0.0;
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f)
    v += mesh.corner(f, 0).dot(mesh.corner(f, 1).cross(mesh.corner(f, 2)));
  return v / 6.0;
}

double surface_area(const TriMesh& mesh) {
  double a = 0.0;
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) a += mesh.face_area(f);
  return a;
}

Aabb3 bounds(const TriMesh& mesh) {
  Aabb3 b;
  for (const Triangle& t : mesh.triangles)
    for (std::uint32_t v : t) b.extend(mesh.vertices[v]);
  return b;
}

Aabb3 face_bounds(const TriMesh& mesh, std::size_t face) {
  Aabb3 b;
  for (int k = 0; k < 3; ++k) b.extend(mesh.corner(face, k));
  return b;
}

TriMesh transformed(const TriMesh& mesh, const Eigen::Isometry3d& xf) {
  TriMesh out = mesh;
  for (Vec3& v : out.vertices) v = xf * v;
  return out;
}

TriMesh translated(const TriMesh& mesh, const Vec3& offset) {
  TriMesh out = mesh;
  for (Vec3& v : out.vertices) v += offset;
  return out;
}

TriMesh make_oriented_box(const Vec3& center, const Mat3& axes, const Vec3& half_extents, const FaceTag& tag) {
  TriMesh m;
  const std::uint32_t t = m.intern_tag(tag);
  for (int i = 0; i < 8; ++i) {
    Vec3 s((i & 1) ? 1.0 : -1.0, (i & 2) ? 1.0 : -1.0, (i & 4) ? 1.0 : -1.0);
    m.add_vertex(center + axes * s.cwiseProduct(half_extents));
  }
  // Faces as quads (outward CCW when axes are right-handed).
  const int quads[6][4] = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
  const bool flip = axes.determinant() < 0;
  for (const auto& q : quads) {
    if (!flip) {
      m.add_triangle(q[0], q[1], q[2], t);
      m.add_triangle(q[0], q[2], q[3], t);
    } else {
      m.add_triangle(q[0], q[2], q[1], t);
      m.add_triangle(q[0], q[3], q[2], t);
    }
  }
  return m;
}

TriMesh make_box(const Vec3& min, const Vec3& max, const FaceTag& tag) {
  return make_oriented_box(0.5 * (min + max), Mat3::Identity(), 0.5 * (max - min), tag);
}

TriMesh extrude_polygon(const Polygon2D& poly, double z0, double z1, const FaceTag& tag) {
  TriMesh m;
  const std::uint32_t t = m.intern_tag(tag);
  const auto n = static_cast<std::uint32_t>(poly.size());
  for (const Vec2& p : poly.vertices()) m.add_vertex({p.x(), p.y(), z0});
  for (const Vec2& p : poly.vertices()) m.add_vertex({p.x(), p.y(), z1});
  for (const auto& tri : triangulate(poly.vertices())) {
    m.add_triangle(n + tri[0], n + tri[1], n + tri[2], t);
    m.add_triangle(tri[0], tri[2], tri[1], t);
  }
  for (std::uint32_t i = 0; i < n; ++i) {
    std::uint32_t j = (i + 1) % n;
    m.add_triangle(i, j, n + j, t);
    m.add_triangle(i, n + j, n + i, t);
  }
  return m;
}

double winding_number(const TriMesh& mesh, const Vec3& p) {
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    Vec3 a = mesh.corner(f, 0) - p, b = mesh.corner(f, 1) - p, c = mesh.corner(f, 2) - p;
    double la = a.norm(), lb = b.norm(), lc = c.norm();
    double num = a.dot(b.cross(c));
    double den = la * lb * lc + a.dot(b) * lc + a.dot(c) * lb + b.dot(c) * la;
    total += 2.0 * std::atan2(num, den);
  }
  return total / (4.0 * std::numbers::pi);
}

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + ab * (d1 / (d1 - d3));
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + ac * (d2 / (d2 - d6));
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

}  // namespace worldmesh

namespace worldmesh {

TriMesh weld_vertices(const TriMesh& mesh, double eps) {
  TriMesh out;
  out.tags = mesh.tags;
  std::map<std::array<long long, 5>, std::uint32_t> index;
  std::vector<std::uint32_t> remap(mesh.vertices.size());
  auto q = [eps](double v) { return std::isfinite(v) ? std::llround(v / eps) : std::numeric_limits<long long>::min(); };
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3& p = mesh.vertices[i];
    std::array<long long, 5> key{q(p.x()), q(p.y()), q(p.z()), 0, 0};
    if (mesh.has_uvs()) {
      key[3] = q(mesh.uvs[i].x());
      key[4] = q(mesh.uvs[i].y());
    }
    auto [it, inserted] = index.emplace(key, static_cast<std::uint32_t>(out.vertices.size()));
    if (inserted) {
      out.vertices.push_back(p);
      if (mesh.has_uvs()) out.uvs.push_back(mesh.uvs[i]);
    }
    remap[i] = it->second;
  }
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    const Triangle& t = mesh.triangles[f];
    Triangle r{remap[t[0]], remap[t[1]], remap[t[2]]};
    if (r[0] == r[1] || r[1] == r[2] || r[0] == r[2]) continue;
    out.triangles.push_back(r);
    out.face_tag.push_back(mesh.face_tag[f]);
  }
  return out;
}

}  // namespace worldmesh
