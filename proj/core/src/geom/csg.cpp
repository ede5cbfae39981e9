#include "worldmesh/geom/csg.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>
#include <numbers>
#include <unordered_map>

#include "worldmesh/error.hpp"

namespace worldmesh {
namespace {

constexpr double kPlaneEps = 1e-9;
// Probe offset used to classify a fragment by the material on either side of it.
constexpr double kProbe = 1e-7;

struct Plane {
  Vec3 n;
  double d;
  double eval(const Vec3& p) const { return n.dot(p) - d; }
};

using Poly = std::vector<Vec3>;

Vec3 newell_normal(const Poly& p) {
  Vec3 n = Vec3::Zero();
  for (std::size_t i = 0; i < p.size(); ++i) n += p[i].cross(p[(i + 1) % p.size()]);
  return 0.5 * n;  // length = polygon area
}

Vec3 poly_centroid(const Poly& p) {
  // Area-weighted centroid of the fan.
  Vec3 c = Vec3::Zero();
  double total = 0.0;
  for (std::size_t i = 1; i + 1 < p.size(); ++i) {
    double a = triangle_area(p[0], p[i], p[i + 1]);
    c += a * (p[0] + p[i] + p[i + 1]) / 3.0;
    total += a;
  }
  if (total <= 0) {
    c = Vec3::Zero();
    for (const Vec3& v : p) c += v;
    return c / static_cast<double>(p.size());
  }
  return c / total;
}

// Returns true when the polygon straddles the plane; fills front/back halves.
bool split(const Poly& poly, const Plane& pl, Poly& front, Poly& back) {
  std::vector<int> side(poly.size());
  bool pos = false, neg = false;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    double s = pl.eval(poly[i]);
    side[i] = s > kPlaneEps ? 1 : (s < -kPlaneEps ? -1 : 0);
    pos |= side[i] > 0;
    neg |= side[i] < 0;
  }
  if (!(pos && neg)) return false;
  front.clear();
  back.clear();
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const std::size_t j = (i + 1) % poly.size();
    const Vec3& p = poly[i];
    const Vec3& q = poly[j];
    if (side[i] >= 0) front.push_back(p);
    if (side[i] <= 0) back.push_back(p);
    if (side[i] * side[j] < 0) {
      double sp = pl.eval(p), sq = pl.eval(q);
      Vec3 x = p + (q - p) * (sp / (sp - sq));
      front.push_back(x);
      back.push_back(x);
    }
  }
  return true;
}

void split_all(std::vector<Poly>& polys, const Plane& pl) {
  std::vector<Poly> out;
  out.reserve(polys.size() + 2);
  Poly f, b;
  for (Poly& p : polys) {
    if (split(p, pl, f, b)) {
      out.push_back(f);
      out.push_back(b);
    } else {
      out.push_back(std::move(p));
    }
  }
  polys = std::move(out);
}

bool separated_on(const Vec3& axis, std::span<const Vec3> a, std::span<const Vec3> b) {
  if (axis.squaredNorm() < 1e-20) return false;
  double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
  for (const Vec3& p : a) {
    double s = axis.dot(p);
    amin = std::min(amin, s);
    amax = std::max(amax, s);
  }
  for (const Vec3& p : b) {
    double s = axis.dot(p);
    bmin = std::min(bmin, s);
    bmax = std::max(bmax, s);
  }
  const double eps = kPlaneEps * std::max(1.0, axis.norm());
  return amax < bmin - eps || bmax < amin - eps;
}

// Separating-axis test between a triangle and a convex point set described by
// its face normals and edge directions. Touching counts as overlapping.
bool separated(std::span<const Vec3> tri, std::span<const Vec3> hull_pts, std::span<const Vec3> hull_normals,
               std::span<const Vec3> hull_edges) {
  for (const Vec3& n : hull_normals)
    if (separated_on(n, tri, hull_pts)) return true;
  Vec3 tn = (tri[1] - tri[0]).cross(tri[2] - tri[0]);
  if (separated_on(tn, tri, hull_pts)) return true;
  for (int k = 0; k < 3; ++k) {
    Vec3 e = tri[(k + 1) % 3] - tri[k];
    for (const Vec3& h : hull_edges)
      if (separated_on(e.cross(h), tri, hull_pts)) return true;
  }
  return false;
}

bool point_in_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& n, double eps) {
  auto edge_ok = [&](const Vec3& u, const Vec3& v) {
    Vec3 inward = n.cross(v - u).normalized();
    return inward.dot(p - u) >= -eps;
  };
  return edge_ok(a, b) && edge_ok(b, c) && edge_ok(c, a);
}

struct WeldKey {
  std::int64_t x, y, z;
  std::uint32_t tag;
  bool operator==(const WeldKey&) const = default;
};
struct WeldHash {
  std::size_t operator()(const WeldKey& k) const {
    std::size_t h = std::hash<std::int64_t>()(k.x);
    h ^= std::hash<std::int64_t>()(k.y) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h ^= std::hash<std::int64_t>()(k.z) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h ^= std::hash<std::uint32_t>()(k.tag) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
  }
};

class Builder {
 public:
  explicit Builder(const TriMesh& base) : base_(base) {
    out_.vertices = base.vertices;
    out_.tags = base.tags;
    if (base.has_uvs()) out_.uvs = base.uvs;
  }

  void keep_original(std::size_t face) {
    const Triangle& t = base_.triangles[face];
    out_.add_triangle(t[0], t[1], t[2], base_.face_tag[face]);
  }

  // Fan-triangulates a convex polygon. `source` is the base face it came from
  // (for index reuse and uv interpolation), or -1 for cutter faces.
  void add_polygon(const Poly& poly, std::uint32_t tag, std::int64_t source) {
    std::vector<std::uint32_t> idx;
    idx.reserve(poly.size());
    for (const Vec3& p : poly) idx.push_back(vertex_for(p, tag, source));
    for (std::size_t i = 1; i + 1 < poly.size(); ++i) {
      if (triangle_area(poly[0], poly[i], poly[i + 1]) <= 1e-12) continue;
      out_.add_triangle(idx[0], idx[i], idx[i + 1], tag);
    }
  }

  TriMesh finish() {
    return filter_faces(out_, [](std::size_t) { return true; });
  }

 private:
  std::uint32_t vertex_for(const Vec3& p, std::uint32_t tag, std::int64_t source) {
    if (source >= 0) {
      for (std::uint32_t v : base_.triangles[static_cast<std::size_t>(source)])
        if (base_.vertices[v] == p) return v;
    }
    WeldKey key{std::llround(p.x() * 1e9), std::llround(p.y() * 1e9), std::llround(p.z() * 1e9), tag};
    auto it = weld_.find(key);
    if (it != weld_.end()) return it->second;
    std::uint32_t v = out_.add_vertex(p);
    if (out_.has_uvs()) out_.uvs.push_back(interpolate_uv(p, source));
    weld_.emplace(key, v);
    return v;
  }

  Vec2 interpolate_uv(const Vec3& p, std::int64_t source) const {
    if (source < 0) return Vec2(std::nan(""), std::nan(""));
    const auto f = static_cast<std::size_t>(source);
    const Vec3 a = base_.corner(f, 0), b = base_.corner(f, 1), c = base_.corner(f, 2);
    const Vec3 n = (b - a).cross(c - a);
    const double area2 = n.squaredNorm();
    const double wb = (p - a).cross(c - a).dot(n) / area2;
    const double wc = (b - a).cross(p - a).dot(n) / area2;
    const Triangle& t = base_.triangles[f];
    return (1 - wb - wc) * base_.uvs[t[0]] + wb * base_.uvs[t[1]] + wc * base_.uvs[t[2]];
  }

  const TriMesh& base_;
  TriMesh out_;
  std::unordered_map<WeldKey, std::uint32_t, WeldHash> weld_;
};

}  // namespace

TriMesh mesh_subtract(const TriMesh& base, const TriMesh& cutter) {
  if (cutter.empty() || base.empty()) return base;

  const bool cutter_inverted = signed_volume(cutter) < 0;
  std::vector<Plane> planes;
  std::vector<Vec3> hull_edges;
  for (std::size_t f = 0; f < cutter.triangles.size(); ++f) {
    Vec3 n = cutter.face_normal(f);
    if (cutter_inverted) n = -n;
    Plane pl{n, n.dot(cutter.corner(f, 0))};
    bool dup = false;
    for (const Plane& q : planes)
      if ((q.n - pl.n).norm() < 1e-9 && std::abs(q.d - pl.d) < 1e-9) dup = true;
    if (!dup) planes.push_back(pl);
    for (int k = 0; k < 3; ++k) {
      Vec3 e = (cutter.corner(f, (k + 1) % 3) - cutter.corner(f, k)).normalized();
      bool have = false;
      for (const Vec3& h : hull_edges)
        if (std::abs(std::abs(h.dot(e)) - 1.0) < 1e-12) have = true;
      if (!have) hull_edges.push_back(e);
    }
  }
  std::vector<Vec3> hull_pts;
  for (const Triangle& t : cutter.triangles)
    for (std::uint32_t v : t) hull_pts.push_back(cutter.vertices[v]);
  for (const Plane& pl : planes)
    for (const Vec3& p : hull_pts)
      if (pl.eval(p) > 1e-9) throw Error(ErrorCode::kInvalidArgument, "cutter is not convex");
  std::vector<Vec3> hull_normals;
  for (const Plane& pl : planes) hull_normals.push_back(pl.n);

  const Aabb3 cutter_box = bounds(cutter);
  if (!bounds(base).overlaps(cutter_box, kPlaneEps)) return base;

  // Faces in the interaction region.
  std::vector<char> near(base.triangles.size(), 0);
  std::vector<std::size_t> near_faces;
  for (std::size_t f = 0; f < base.triangles.size(); ++f) {
    if (!face_bounds(base, f).overlaps(cutter_box, kPlaneEps)) continue;
    std::array<Vec3, 3> tri{base.corner(f, 0), base.corner(f, 1), base.corner(f, 2)};
    if (separated(tri, hull_pts, hull_normals, hull_edges)) continue;
    near[f] = 1;
    near_faces.push_back(f);
  }
  {
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> edge_use;
    for (std::size_t f : near_faces)
      for (int k = 0; k < 3; ++k) {
        std::uint32_t a = base.triangles[f][k], b = base.triangles[f][(k + 1) % 3];
        ++edge_use[{std::min(a, b), std::max(a, b)}];
      }
    // Count the far side of near edges too, so an edge's full fan is seen.
    for (std::size_t f = 0; f < base.triangles.size(); ++f) {
      if (near[f]) continue;
      for (int k = 0; k < 3; ++k) {
        std::uint32_t a = base.triangles[f][k], b = base.triangles[f][(k + 1) % 3];
        auto it = edge_use.find({std::min(a, b), std::max(a, b)});
        if (it != edge_use.end()) ++it->second;
      }
    }
    for (const auto& [edge, count] : edge_use)
      if (count > 2)
        throw Error(ErrorCode::kNonManifoldInput, "edge (" + std::to_string(edge.first) + "," +
                                                      std::to_string(edge.second) + ") is shared by " +
                                                      std::to_string(count) + " triangles");
  }

  auto inside_cutter = [&](const Vec3& q) {
    for (const Plane& pl : planes)
      if (pl.eval(q) >= 0.0) return false;
    return true;
  };

  Builder builder(base);
  bool changed = false;

  for (std::size_t f = 0; f < base.triangles.size(); ++f) {
    if (!near[f]) {
      builder.keep_original(f);
      continue;
    }
    const Vec3 m = base.face_normal(f);
    std::vector<Poly> frags{{base.corner(f, 0), base.corner(f, 1), base.corner(f, 2)}};
    for (const Plane& pl : planes) split_all(frags, pl);
    if (frags.size() == 1) {
      if (inside_cutter(poly_centroid(frags[0]) - kProbe * m)) {
        changed = true;
      } else {
        builder.keep_original(f);
      }
      continue;
    }
    changed = true;
    for (const Poly& p : frags) {
      if (newell_normal(p).norm() <= 1e-14) continue;
      if (inside_cutter(poly_centroid(p) - kProbe * m)) continue;
      builder.add_polygon(p, base.face_tag[f], static_cast<std::int64_t>(f));
    }
  }

  // Cutter faces inside the base become the walls of the carved cavity.
  for (std::size_t cf = 0; cf < cutter.triangles.size(); ++cf) {
    std::array<Vec3, 3> ctri{cutter.corner(cf, 0), cutter.corner(cf, 1), cutter.corner(cf, 2)};
    if (cutter_inverted) std::swap(ctri[1], ctri[2]);
    const Vec3 n = (ctri[1] - ctri[0]).cross(ctri[2] - ctri[0]).normalized();
    Aabb3 cbox;
    for (const Vec3& p : ctri) cbox.extend(p);

    std::vector<std::size_t> touching;
    std::vector<std::size_t> coplanar;
    const std::array<Vec3, 3> cn{n, n, n};
    for (std::size_t f : near_faces) {
      if (!face_bounds(base, f).overlaps(cbox, kPlaneEps)) continue;
      std::array<Vec3, 3> tri{base.corner(f, 0), base.corner(f, 1), base.corner(f, 2)};
      std::array<Vec3, 3> edges{(ctri[1] - ctri[0]).normalized(), (ctri[2] - ctri[1]).normalized(),
                                (ctri[0] - ctri[2]).normalized()};
      if (separated(tri, ctri, std::span<const Vec3>(cn.data(), 1), edges)) continue;
      touching.push_back(f);
      const Vec3 bn = base.face_normal(f);
      if (std::abs(std::abs(bn.dot(n)) - 1.0) < 1e-12 && std::abs(n.dot(tri[0] - ctri[0])) < kPlaneEps)
        coplanar.push_back(f);
    }
    std::vector<Poly> frags{{ctri[0], ctri[1], ctri[2]}};
    for (std::size_t f : touching) {
      const Vec3 bn = base.face_normal(f);
      const Vec3 a = base.corner(f, 0);
      if (std::find(coplanar.begin(), coplanar.end(), f) != coplanar.end()) {
        for (int k = 0; k < 3; ++k) {
          Vec3 u = base.corner(f, k), v = base.corner(f, (k + 1) % 3);
          Vec3 en = (v - u).cross(bn).normalized();
          split_all(frags, Plane{en, en.dot(u)});
        }
      } else {
        split_all(frags, Plane{bn, bn.dot(a)});
      }
    }

    for (const Poly& p : frags) {
      if (newell_normal(p).norm() <= 1e-14) continue;
      const Vec3 c = poly_centroid(p);
      bool on_base = false;
      for (std::size_t f : coplanar) {
        if (point_in_triangle(c, base.corner(f, 0), base.corner(f, 1), base.corner(f, 2), base.face_normal(f), 1e-9)) {
          on_base = true;
          break;
        }
      }
      if (on_base) continue;
      const Vec3 q = c + kProbe * n;
      std::vector<double> per_tag(base.tags.size(), 0.0);
      double total = 0.0;
      for (std::size_t f = 0; f < base.triangles.size(); ++f) {
        Vec3 a = base.corner(f, 0) - q, b = base.corner(f, 1) - q, cc = base.corner(f, 2) - q;
        double la = a.norm(), lb = b.norm(), lc = cc.norm();
        double w = 2.0 * std::atan2(a.dot(b.cross(cc)), la * lb * lc + a.dot(b) * lc + a.dot(cc) * lb + b.dot(cc) * la);
        per_tag[base.face_tag[f]] += w;
        total += w;
      }
      if (total / (4.0 * std::numbers::pi) <= 0.5) continue;
      std::uint32_t tag = 0;
      for (std::size_t t = 1; t < per_tag.size(); ++t)
        if (per_tag[t] > per_tag[tag]) tag = static_cast<std::uint32_t>(t);
      Poly reversed(p.rbegin(), p.rend());
      builder.add_polygon(reversed, tag, -1);
      changed = true;
    }
  }

  if (!changed) return base;
  return builder.finish();
}

}  // namespace worldmesh
