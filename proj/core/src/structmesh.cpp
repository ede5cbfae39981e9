#include "worldmesh/structmesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "worldmesh/geom/csg.hpp"

namespace worldmesh {

std::vector<SharedSpan> shared_spans(const std::vector<SharedEdge>& shared, int room_index) {
  std::vector<SharedSpan> out;
  for (const SharedEdge& s : shared) {
    if (s.room_a == room_index)
      out.push_back({s.edge_a, s.overlap.a0, s.overlap.a1, s.room_b});
    else if (s.room_b == room_index)
      out.push_back({s.edge_b, std::min(s.overlap.b0, s.overlap.b1), std::max(s.overlap.b0, s.overlap.b1), s.room_a});
  }
  return out;
}

namespace {

constexpr double kSplitEps = 1e-9;

struct SplitPolygon {
  std::vector<Vec2> pts;
  std::vector<int> edge;            // source edge of sub-edge i
  std::vector<double> s0, s1;       // arc-length interval on that edge
  std::vector<double> dist;         // inset distance of sub-edge i
};

SplitPolygon split_edges(const Polygon2D& poly, double t, std::span<const SharedSpan> shared) {
  SplitPolygon sp;
  for (std::size_t e = 0; e < poly.size(); ++e) {
    const double len = poly.edge_length(e);
    std::vector<double> cuts = {0.0, len};
    for (const SharedSpan& s : shared) {
      if (s.edge != static_cast<int>(e)) continue;
      cuts.push_back(std::clamp(s.s0, 0.0, len));
      cuts.push_back(std::clamp(s.s1, 0.0, len));
    }
    std::sort(cuts.begin(), cuts.end());
    std::vector<double> uniq;
    for (double c : cuts)
      if (uniq.empty() || c - uniq.back() > kSplitEps) uniq.push_back(c);
    if (len - uniq.back() <= kSplitEps) uniq.back() = len;
    const Vec2 u = poly.edge_direction(e);
    for (std::size_t k = 0; k + 1 < uniq.size(); ++k) {
      const double a = uniq[k], b = uniq[k + 1];
      sp.pts.push_back(k == 0 ? poly.edge_start(e) : Vec2(poly.edge_start(e) + u * a));
      sp.edge.push_back(static_cast<int>(e));
      sp.s0.push_back(a);
      sp.s1.push_back(b);
      const double mid = 0.5 * (a + b);
      bool is_shared = std::any_of(shared.begin(), shared.end(), [&](const SharedSpan& s) {
        return s.edge == static_cast<int>(e) && mid > s.s0 && mid < s.s1;
      });
      sp.dist.push_back(is_shared ? 0.5 * t : t);
    }
  }
  return sp;
}

// 2D point welding by exact bit pattern after rounding to 1e-9 m.
struct Welder {
  std::map<std::pair<long long, long long>, std::uint32_t> index;
  std::vector<Vec2> pts;
  std::uint32_t operator()(const Vec2& p) {
    auto key = std::make_pair(std::llround(p.x() * 1e9), std::llround(p.y() * 1e9));
    auto [it, inserted] = index.emplace(key, static_cast<std::uint32_t>(pts.size()));
    if (inserted) pts.push_back(p);
    return it->second;
  }
};

// Prism over a set of CCW cells in the plane sharing welded vertices: caps at
// z0/z1 plus a vertical face on every cell edge whose reverse is absent.
TriMesh extrude_cells(const std::vector<std::vector<std::uint32_t>>& cells, const std::vector<Vec2>& pts, double z0,
                      double z1, const FaceTag& tag) {
  TriMesh m;
  const std::uint32_t t = m.intern_tag(tag);
  const auto n = static_cast<std::uint32_t>(pts.size());
  for (const Vec2& p : pts) m.add_vertex({p.x(), p.y(), z0});
  for (const Vec2& p : pts) m.add_vertex({p.x(), p.y(), z1});
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> directed;
  for (const auto& cell : cells) {
    std::vector<Vec2> local;
    for (std::uint32_t v : cell) local.push_back(pts[v]);
    for (const auto& tri : triangulate(local)) {
      std::uint32_t a = cell[static_cast<std::size_t>(tri[0])], b = cell[static_cast<std::size_t>(tri[1])],
                    c = cell[static_cast<std::size_t>(tri[2])];
      m.add_triangle(n + a, n + b, n + c, t);
      m.add_triangle(a, c, b, t);
    }
    for (std::size_t i = 0; i < cell.size(); ++i) ++directed[{cell[i], cell[(i + 1) % cell.size()]}];
  }
  for (const auto& [edge, count] : directed) {
    if (directed.count({edge.second, edge.first})) continue;
    const auto [u, v] = edge;
    m.add_triangle(u, v, n + v, t);
    m.add_triangle(u, n + v, n + u, t);
  }
  return m;
}

bool on_segment_interior(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 <= 0) return false;
  const double s = (p - a).dot(ab) / len2;
  return s > 1e-9 && s < 1 - 1e-9 && point_segment_distance(p, a, b) < 1e-9;
}

}  // namespace

std::vector<WallRun> wall_runs(const Room& room, int room_index, double wall_thickness,
                               std::span<const SharedSpan> shared) {
  SplitPolygon sp = split_edges(room.floor, wall_thickness, shared);
  InsetEdges inset = inset_edges(Polygon2D(sp.pts), sp.dist);
  std::vector<WallRun> runs;
  const std::size_t n = sp.pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    WallRun r;
    r.room = room_index;
    r.edge = sp.edge[i];
    r.s0 = sp.s0[i];
    r.s1 = sp.s1[i];
    r.thickness = sp.dist[i];
    r.outer_start = sp.pts[i];
    r.outer_end = sp.pts[(i + 1) % n];
    r.inner_start = inset.inner[i][0];
    r.inner_end = inset.inner[i][1];
    r.inward = room.floor.inward_normal(static_cast<std::size_t>(sp.edge[i]));
    r.height = room.ceiling_height;
    runs.push_back(r);
  }
  return runs;
}

std::vector<WallRun> wall_runs(const FloorPlan& plan) {
  const auto shared = detect_shared_edges(plan);
  std::vector<WallRun> out;
  for (std::size_t r = 0; r < plan.rooms.size(); ++r) {
    auto spans = shared_spans(shared, static_cast<int>(r));
    auto runs = wall_runs(plan.rooms[r], static_cast<int>(r), plan.wall_thickness, spans);
    out.insert(out.end(), runs.begin(), runs.end());
  }
  return out;
}

Polygon2D inner_outline(const std::vector<WallRun>& runs, int room_index) {
  std::vector<Vec2> ring;
  for (const WallRun& run : runs) {
    if (run.room != room_index) continue;
    for (const Vec2& q : {run.inner_start, run.inner_end})
      if (ring.empty() || (ring.back() - q).norm() > 1e-9) ring.push_back(q);
  }
  if (ring.size() > 1 && (ring.front() - ring.back()).norm() <= 1e-9) ring.pop_back();
  return Polygon2D(std::move(ring));
}

TriMesh build_room_walls(const Room& room, double wall_thickness, std::span<const SharedSpan> shared) {
  auto runs = wall_runs(room, 0, wall_thickness, shared);
  const std::size_t n = runs.size();
  Welder weld;
  std::vector<std::vector<std::uint32_t>> cells;
  for (std::size_t i = 0; i < n; ++i) {
    const WallRun& r = runs[i];
    const WallRun& prev = runs[(i + n - 1) % n];
    const WallRun& next = runs[(i + 1) % n];
    // Cell P_i, P_i+1, [step], B_i, A_i, [step]. A step vertex from a thinner
    // neighbour lies on this cell's side and must be shared to stay watertight.
    std::vector<Vec2> ring = {r.outer_start, r.outer_end};
    if (on_segment_interior(next.inner_start, r.outer_end, r.inner_end)) ring.push_back(next.inner_start);
    ring.push_back(r.inner_end);
    ring.push_back(r.inner_start);
    if (on_segment_interior(prev.inner_end, r.inner_start, r.outer_start)) ring.push_back(prev.inner_end);
    std::vector<std::uint32_t> cell;
    for (const Vec2& p : ring) cell.push_back(weld(p));
    cells.push_back(std::move(cell));
  }
  return extrude_cells(cells, weld.pts, 0.0, room.ceiling_height, FaceTag{room.id, Category::kWall, {}});
}

TriMesh opening_cutter(const FloorPlan& plan, const std::vector<SharedEdge>& shared, int room_index,
                       std::size_t index) {
  const Room& room = plan.rooms[static_cast<std::size_t>(room_index)];
  const Opening& o = room.openings[index];
  const auto e = static_cast<std::size_t>(o.edge);
  const double t = plan.wall_thickness;
  double host = t, beyond = 0.0;
  double top_limit = room.ceiling_height;
  const double mid = o.offset + 0.5 * o.width;
  for (const SharedSpan& s : shared_spans(shared, room_index)) {
    if (s.edge == o.edge && mid > s.s0 && mid < s.s1) {
      host = 0.5 * t;
      beyond = 0.5 * t;
      top_limit = std::max(top_limit, plan.rooms[static_cast<std::size_t>(s.neighbour)].ceiling_height);
    }
  }
  const Vec2 u = room.floor.edge_direction(e);
  const Vec2 nrm = room.floor.inward_normal(e);
  const double a0 = -beyond - kCutterMargin, a1 = host + kCutterMargin;
  // Openings flush with the floor or ceiling extend past the wall so no cutter
  // face is coplanar with a wall cap.
  const double z0 = o.sill <= 1e-9 ? -kCutterMargin : o.sill;
  const double z1 = o.head >= top_limit - 1e-9 ? top_limit + kCutterMargin : o.head;
  const Vec2 c2 = room.floor.edge_start(e) + u * mid + nrm * (0.5 * (a0 + a1));
  Mat3 axes;
  axes.col(0) = Vec3(u.x(), u.y(), 0);
  axes.col(1) = Vec3(nrm.x(), nrm.y(), 0);
  axes.col(2) = Vec3::UnitZ();
  return make_oriented_box(Vec3(c2.x(), c2.y(), 0.5 * (z0 + z1)), axes,
                           Vec3(0.5 * o.width, 0.5 * (a1 - a0), 0.5 * (z1 - z0)));
}

TriMesh carve_openings(const TriMesh& walls, const FloorPlan& plan, const std::vector<SharedEdge>& shared) {
  TriMesh mesh = walls;
  for (std::size_t r = 0; r < plan.rooms.size(); ++r) {
    const Room& room = plan.rooms[r];
    for (std::size_t k = 0; k < room.openings.size(); ++k) {
      if (room.openings[k].mirrored) continue;
      const double before = signed_volume(mesh);
      TriMesh carved = mesh_subtract(mesh, opening_cutter(plan, shared, static_cast<int>(r), k));
      if (before - signed_volume(carved) < 1e-9)
        throw Error(ErrorCode::kOpeningOutsideWall, opening_id(room, k) + " does not intersect its host wall");
      mesh = std::move(carved);
    }
  }
  return mesh;
}

TriMesh build_floor_ceiling(const Room& room, double slab_thickness) {
  TriMesh m = extrude_polygon(room.floor, -slab_thickness, 0.0, FaceTag{room.id, Category::kFloor, {}});
  m.append(extrude_polygon(room.floor, room.ceiling_height, room.ceiling_height + slab_thickness,
                           FaceTag{room.id, Category::kCeiling, {}}));
  return m;
}

TriMesh assemble_struct_mesh(const FloorPlan& plan, const StructOptions& options) {
  if (!(options.slab_thickness > 0)) throw Error(ErrorCode::kInvalidArgument, "slab thickness must be positive");
  const auto shared = detect_shared_edges(plan);
  TriMesh walls;
  for (std::size_t r = 0; r < plan.rooms.size(); ++r) {
    auto spans = shared_spans(shared, static_cast<int>(r));
    walls.append(build_room_walls(plan.rooms[r], plan.wall_thickness, spans));
  }
  TriMesh mesh = carve_openings(walls, plan, shared);
  for (const Room& room : plan.rooms) mesh.append(build_floor_ceiling(room, options.slab_thickness));
  return mesh;
}

}  // namespace worldmesh
