#include "worldmesh/geom/polygon.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "worldmesh/error.hpp"

namespace worldmesh {

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double signed_area(std::span<const Vec2> pts) {
  double s = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) s += cross2(pts[i], pts[(i + 1) % pts.size()]);
  return 0.5 * s;
}

namespace {

int orient(const Vec2& a, const Vec2& b, const Vec2& c) {
  double v = cross2(b - a, c - a);
  if (v > 1e-15) return 1;
  if (v < -1e-15) return -1;
  return 0;
}

bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
  return std::min(a.x(), b.x()) - 1e-15 <= p.x() && p.x() <= std::max(a.x(), b.x()) + 1e-15 &&
         std::min(a.y(), b.y()) - 1e-15 <= p.y() && p.y() <= std::max(a.y(), b.y()) + 1e-15;
}

bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  int o1 = orient(p1, p2, q1), o2 = orient(p1, p2, q2);
  int o3 = orient(q1, q2, p1), o4 = orient(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p1, p2, q1)) return true;
  if (o2 == 0 && on_segment(p1, p2, q2)) return true;
  if (o3 == 0 && on_segment(q1, q2, p1)) return true;
  if (o4 == 0 && on_segment(q1, q2, p2)) return true;
  return false;
}

Vec2 left_normal(const Vec2& dir) { return {-dir.y(), dir.x()}; }

}  // namespace

bool is_simple(std::span<const Vec2> pts) {
  const std::size_t n = pts.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a0 = pts[i];
    const Vec2& a1 = pts[(i + 1) % n];
    for (std::size_t j = i + 1; j < n; ++j) {
      const Vec2& b0 = pts[j];
      const Vec2& b1 = pts[(j + 1) % n];
      const bool adjacent_next = j == i + 1;
      const bool adjacent_wrap = i == 0 && j == n - 1;
      if (adjacent_next || adjacent_wrap) {
        // Neighbouring edges may only share their common vertex; a fold-back
        // (collinear overlap) is a self-intersection.
        const Vec2& shared = adjacent_next ? a1 : a0;
        const Vec2& other_a = adjacent_next ? a0 : a1;
        const Vec2& other_b = adjacent_next ? b1 : b0;
        if (orient(other_a, shared, other_b) == 0 && (other_a - shared).dot(other_b - shared) > 0) return false;
        continue;
      }
      if (segments_intersect(a0, a1, b0, b1)) return false;
    }
  }
  return true;
}

Polygon2D::Polygon2D(std::vector<Vec2> vertices) : vertices_(std::move(vertices)) {
  if (vertices_.size() < 3) throw Error(ErrorCode::kInvariantError, "polygon needs at least 3 vertices");
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    if (!vertices_[i].allFinite()) throw Error(ErrorCode::kInvariantError, "polygon vertex is not finite");
    if ((vertices_[i] - vertices_[(i + 1) % vertices_.size()]).norm() <= kCoincidentEps)
      throw Error(ErrorCode::kInvariantError, "polygon has coincident consecutive vertices at index " + std::to_string(i));
  }
  if (signed_area(vertices_) <= 0.0) throw Error(ErrorCode::kInvariantError, "polygon is not counter-clockwise");
  if (!is_simple(vertices_)) throw Error(ErrorCode::kInvariantError, "polygon self-intersects");
}

Vec2 Polygon2D::inward_normal(std::size_t i) const { return left_normal(edge_direction(i)); }

double Polygon2D::area() const { return signed_area(vertices_); }

double Polygon2D::perimeter() const {
  double p = 0.0;
  for (std::size_t i = 0; i < size(); ++i) p += edge_length(i);
  return p;
}

Vec2 Polygon2D::centroid() const {
  Vec2 c = Vec2::Zero();
  double a = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    const Vec2& p = vertices_[i];
    const Vec2& q = vertices_[(i + 1) % size()];
    double w = cross2(p, q);
    a += w;
    c += (p + q) * w;
  }
  return c / (3.0 * a);
}

bool Polygon2D::contains(const Vec2& p) const {
  if (distance_to_boundary(p) <= kCoincidentEps) return false;
  bool inside = false;
  for (std::size_t i = 0, j = size() - 1; i < size(); j = i++) {
    const Vec2& a = vertices_[i];
    const Vec2& b = vertices_[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  Vec2 ab = b - a;
  double len2 = ab.squaredNorm();
  double t = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (a + t * ab - p).norm();
}

double Polygon2D::distance_to_boundary(const Vec2& p) const {
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < size(); ++i) d = std::min(d, point_segment_distance(p, edge_start(i), edge_end(i)));
  return d;
}

Vec2 Polygon2D::point_at_arc_length(double s) const {
  const double per = perimeter();
  s = std::fmod(s, per);
  if (s < 0) s += per;
  for (std::size_t i = 0; i < size(); ++i) {
    double len = edge_length(i);
    if (s <= len || i + 1 == size()) return edge_start(i) + edge_direction(i) * std::min(s, len);
    s -= len;
  }
  return vertices_.front();
}

InsetEdges inset_edges(const Polygon2D& poly, std::span<const double> distances) {
  const std::size_t n = poly.size();
  if (distances.size() != n) throw Error(ErrorCode::kInvalidArgument, "inset distance count must match edge count");
  for (double d : distances)
    if (!(d > 0.0)) throw Error(ErrorCode::kInvalidArgument, "inset distance must be positive");

  std::vector<Vec2> dir(n), nrm(n);
  for (std::size_t i = 0; i < n; ++i) {
    dir[i] = poly.edge_direction(i);
    nrm[i] = left_normal(dir[i]);
  }

  InsetEdges out;
  out.inner.resize(n);
  // Joint at vertex i between edge prev=i-1 and edge i.
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t prev = (i + n - 1) % n;
    const Vec2& p = poly[i];
    const double c = cross2(dir[prev], dir[i]);
    if (std::abs(c) < 1e-12) {
      if (dir[prev].dot(dir[i]) < 0) throw Error(ErrorCode::kInsetCollapse, "polygon folds back on itself");
      out.inner[prev][1] = p + nrm[prev] * distances[prev];
      out.inner[i][0] = p + nrm[i] * distances[i];
      continue;
    }
    // Solve for x on both offset lines: nrm[k].x = nrm[k].P + d_k.
    Eigen::Matrix2d m;
    m << nrm[prev].x(), nrm[prev].y(), nrm[i].x(), nrm[i].y();
    Vec2 rhs(nrm[prev].dot(p) + distances[prev], nrm[i].dot(p) + distances[i]);
    Vec2 x = m.partialPivLu().solve(rhs);
    out.inner[prev][1] = x;
    out.inner[i][0] = x;
  }

  for (std::size_t i = 0; i < n; ++i) {
    Vec2 seg = out.inner[i][1] - out.inner[i][0];
    if (seg.dot(dir[i]) <= kCoincidentEps)
      throw Error(ErrorCode::kInsetCollapse, "offset edge " + std::to_string(i) + " vanished or reversed");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& start = out.inner[i][0];
    if (out.polygon.empty() || (out.polygon.back() - start).norm() > kCoincidentEps) out.polygon.push_back(start);
    out.polygon.push_back(out.inner[i][1]);
  }
  if ((out.polygon.back() - out.polygon.front()).norm() <= kCoincidentEps) out.polygon.pop_back();
  // Collinear step vertices can produce coincident neighbours when distances match.
  std::vector<Vec2> cleaned;
  for (const Vec2& v : out.polygon)
    if (cleaned.empty() || (cleaned.back() - v).norm() > kCoincidentEps) cleaned.push_back(v);
  out.polygon = std::move(cleaned);

  if (out.polygon.size() < 3 || signed_area(out.polygon) <= 0.0 || !is_simple(out.polygon))
    throw Error(ErrorCode::kInsetCollapse, "inset polygon self-intersects or has non-positive area");
  return out;
}

Polygon2D inset_polygon(const Polygon2D& poly, double d) {
  if (!(d > 0.0)) throw Error(ErrorCode::kInvalidArgument, "inset distance must be positive");
  std::vector<double> dist(poly.size(), d);
  InsetEdges e = inset_edges(poly, dist);
  // Drop collinear duplicates that uniform offsets leave at straight vertices.
  std::vector<Vec2> pts;
  for (std::size_t i = 0; i < e.polygon.size(); ++i) pts.push_back(e.polygon[i]);
  return Polygon2D(std::move(pts));
}

std::vector<std::array<int, 3>> triangulate(std::span<const Vec2> pts) {
  std::vector<std::array<int, 3>> tris;
  std::vector<int> idx(pts.size());
  std::iota(idx.begin(), idx.end(), 0);

  auto is_ear = [&](std::size_t k) {
    const std::size_t m = idx.size();
    const Vec2& a = pts[idx[(k + m - 1) % m]];
    const Vec2& b = pts[idx[k]];
    const Vec2& c = pts[idx[(k + 1) % m]];
    if (cross2(b - a, c - b) <= 1e-14) return false;
    for (std::size_t j = 0; j < m; ++j) {
      if (j == k || j == (k + m - 1) % m || j == (k + 1) % m) continue;
      const Vec2& p = pts[idx[j]];
      if ((p - a).norm() < 1e-12 || (p - b).norm() < 1e-12 || (p - c).norm() < 1e-12) continue;
      if (cross2(b - a, p - a) >= -1e-14 && cross2(c - b, p - b) >= -1e-14 && cross2(a - c, p - c) >= -1e-14)
        return false;
    }
    return true;
  };

  while (idx.size() > 3) {
    bool clipped = false;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (is_ear(k)) {
        const std::size_t m = idx.size();
        tris.push_back({idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]});
        idx.erase(idx.begin() + static_cast<std::ptrdiff_t>(k));
        clipped = true;
        break;
      }
    }
    if (clipped) continue;
    // No ear: remove a collinear vertex (contributes no area).
    bool removed = false;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const std::size_t m = idx.size();
      const Vec2& a = pts[idx[(k + m - 1) % m]];
      const Vec2& b = pts[idx[k]];
      const Vec2& c = pts[idx[(k + 1) % m]];
      if (std::abs(cross2(b - a, c - b)) <= 1e-14) {
        idx.erase(idx.begin() + static_cast<std::ptrdiff_t>(k));
        removed = true;
        break;
      }
    }
    if (!removed) throw Error(ErrorCode::kInvariantError, "triangulation failed: polygon is not simple");
  }
  if (idx.size() == 3) {
    const Vec2& a = pts[idx[0]];
    const Vec2& b = pts[idx[1]];
    const Vec2& c = pts[idx[2]];
    if (cross2(b - a, c - a) > 1e-14) tris.push_back({idx[0], idx[1], idx[2]});
  }
  return tris;
}

std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip) {
  std::vector<Vec2> out(subject.begin(), subject.end());
  for (std::size_t i = 0; i < clip.size() && !out.empty(); ++i) {
    const Vec2& a = clip[i];
    const Vec2& b = clip[(i + 1) % clip.size()];
    std::vector<Vec2> in = std::move(out);
    out.clear();
    auto side = [&](const Vec2& p) { return cross2(b - a, p - a); };
    for (std::size_t k = 0; k < in.size(); ++k) {
      const Vec2& p = in[k];
      const Vec2& q = in[(k + 1) % in.size()];
      double sp = side(p), sq = side(q);
      if (sp >= 0) out.push_back(p);
      if ((sp >= 0) != (sq >= 0)) out.push_back(p + (q - p) * (sp / (sp - sq)));
    }
  }
  return out;
}

double intersection_area(const Polygon2D& a, const Polygon2D& b) {
  auto ta = triangulate(a.vertices());
  auto tb = triangulate(b.vertices());
  double area = 0.0;
  for (const auto& t : ta) {
    std::array<Vec2, 3> pa{a[t[0]], a[t[1]], a[t[2]]};
    for (const auto& u : tb) {
      std::array<Vec2, 3> pb{b[u[0]], b[u[1]], b[u[2]]};
      auto clipped = clip_convex(pa, pb);
      if (clipped.size() >= 3) area += std::max(0.0, signed_area(clipped));
    }
  }
  return area;
}

std::vector<Vec2> convex_hull(std::span<const Vec2> pts) {
  const std::size_t n = pts.size();
  if (n == 0) return {};
  // Tolerances relative to the extent of the input, so projected points that
  // differ only by rounding collapse.
  Vec2 lo = pts[0], hi = pts[0];
  for (const Vec2& q : pts) {
    lo = lo.cwiseMin(q);
    hi = hi.cwiseMax(q);
  }
  const double scale = std::max((hi - lo).norm(), 1e-300);
  const double eps_len = 1e-9 * scale, eps_area = 1e-12 * scale * scale;
  bool convex = n >= 3 && signed_area(pts) > 0;
  double turning = 0;
  for (std::size_t i = 0; convex && i < n; ++i) {
    const Vec2 e0 = pts[(i + 1) % n] - pts[i], e1 = pts[(i + 2) % n] - pts[(i + 1) % n];
    if (e0.norm() <= eps_len || cross2(e0, e1) < -eps_area) convex = false;
    else turning += std::atan2(cross2(e0, e1), e0.dot(e1));
  }
  // A point list that winds around twice also turns left everywhere.
  if (convex && std::abs(turning - 2 * std::numbers::pi) > 1e-6) convex = false;
  if (convex) {
    std::vector<Vec2> hull;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2& prev = pts[(i + n - 1) % n];
      const Vec2& next = pts[(i + 1) % n];
      if (std::abs(cross2(pts[i] - prev, next - pts[i])) > eps_area) hull.push_back(pts[i]);
    }
    return hull;
  }
  std::vector<Vec2> p(pts.begin(), pts.end());
  std::sort(p.begin(), p.end(), [](const Vec2& a, const Vec2& b) { return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y()); });
  std::vector<Vec2> h(2 * p.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    while (k >= 2 && cross2(h[k - 1] - h[k - 2], p[i] - h[k - 2]) <= eps_area) --k;
    if (k == 1 && (p[i] - h[0]).norm() <= eps_len) continue;
    h[k++] = p[i];
  }
  for (std::size_t i = p.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && cross2(h[k - 1] - h[k - 2], p[i - 1] - h[k - 2]) <= eps_area) --k;
    if (k == t - 1 && (p[i - 1] - h[k - 1]).norm() <= eps_len) continue;
    h[k++] = p[i - 1];
  }
  h.resize(k > 0 ? k - 1 : 0);
  // The closing point of the upper chain can land next to the first one.
  while (h.size() > 1 && (h.back() - h.front()).norm() <= eps_len) h.pop_back();
  return h;
}

Rect2 min_area_rect(std::span<const Vec2> pts) {
  std::vector<Vec2> hull = convex_hull(pts);
  if (hull.size() < 3) throw Error(ErrorCode::kInvalidArgument, "min_area_rect needs a non-degenerate point set");
  double best_area = std::numeric_limits<double>::infinity();
  Rect2 best{};
  for (std::size_t i = 0; i < hull.size(); ++i) {
    Vec2 u = (hull[(i + 1) % hull.size()] - hull[i]).normalized();
    Vec2 v = left_normal(u);
    double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
    for (const Vec2& p : hull) {
      double a = (p - hull[i]).dot(u), b = (p - hull[i]).dot(v);
      umin = std::min(umin, a);
      umax = std::max(umax, a);
      vmin = std::min(vmin, b);
      vmax = std::max(vmax, b);
    }
    double area = (umax - umin) * (vmax - vmin);
    if (area < best_area - 1e-12) {
      best_area = area;
      const Vec2& o = hull[i];
      best.corners = {o + u * umin + v * vmin, o + u * umax + v * vmin, o + u * umax + v * vmax, o + u * umin + v * vmax};
      best.center = 0.25 * (best.corners[0] + best.corners[1] + best.corners[2] + best.corners[3]);
    }
  }
  return best;
}

std::optional<SegmentOverlap> collinear_overlap(const Vec2& a_start, const Vec2& a_end, const Vec2& b_start,
                                                const Vec2& b_end, double tol, double min_length) {
  const Vec2 da = a_end - a_start;
  const Vec2 db = b_end - b_start;
  const double la = da.norm(), lb = db.norm();
  if (la <= kCoincidentEps || lb <= kCoincidentEps) return std::nullopt;
  const Vec2 ua = da / la, ub = db / lb;
  auto line_dist = [](const Vec2& p, const Vec2& o, const Vec2& u) { return std::abs(cross2(u, p - o)); };
  if (line_dist(b_start, a_start, ua) > tol || line_dist(b_end, a_start, ua) > tol) return std::nullopt;
  if (line_dist(a_start, b_start, ub) > tol || line_dist(a_end, b_start, ub) > tol) return std::nullopt;
  double s0 = (b_start - a_start).dot(ua);
  double s1 = (b_end - a_start).dot(ua);
  double lo = std::max(0.0, std::min(s0, s1));
  double hi = std::min(la, std::max(s0, s1));
  if (hi - lo < min_length) return std::nullopt;
  SegmentOverlap o;
  o.a0 = lo;
  o.a1 = hi;
  o.b0 = std::clamp((a_start + ua * lo - b_start).dot(ub), 0.0, lb);
  o.b1 = std::clamp((a_start + ua * hi - b_start).dot(ub), 0.0, lb);
  return o;
}

}  // namespace worldmesh
