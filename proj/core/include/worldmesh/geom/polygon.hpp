#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "worldmesh/geom/types.hpp"

namespace worldmesh {

// Simple counter-clockwise polygon in the XY plane. Construction validates the
// invariants (>= 3 vertices, no coincident neighbours, simple, positive area)
// and throws Error{kInvariantError} otherwise.
class Polygon2D {
 public:
  explicit Polygon2D(std::vector<Vec2> vertices);

  const std::vector<Vec2>& vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }
  const Vec2& operator[](std::size_t i) const { return vertices_[i]; }

  const Vec2& edge_start(std::size_t i) const { return vertices_[i]; }
  const Vec2& edge_end(std::size_t i) const { return vertices_[(i + 1) % vertices_.size()]; }
  double edge_length(std::size_t i) const { return (edge_end(i) - edge_start(i)).norm(); }
  Vec2 edge_direction(std::size_t i) const { return (edge_end(i) - edge_start(i)).normalized(); }
  // Unit normal pointing into the polygon (left of a CCW edge).
  Vec2 inward_normal(std::size_t i) const;

  double area() const;
  double perimeter() const;
  Vec2 centroid() const;
  // Strict interior test; points within kCoincidentEps of the boundary are outside.
  bool contains(const Vec2& p) const;
  double distance_to_boundary(const Vec2& p) const;
  // Point at arc length s (wrapped) measured from vertex 0 along the boundary.
  Vec2 point_at_arc_length(double s) const;

  bool operator==(const Polygon2D& o) const { return vertices_ == o.vertices_; }

 private:
  std::vector<Vec2> vertices_;
};

double signed_area(std::span<const Vec2> pts);
bool is_simple(std::span<const Vec2> pts);
double cross2(const Vec2& a, const Vec2& b);

// Inward offset with miter joins. Throws Error{kInsetCollapse}.
Polygon2D inset_polygon(const Polygon2D& poly, double d);

// Per-edge inset: inner segment of each source edge plus the assembled inner
// polygon. Collinear neighbours with different offsets are joined by a
// perpendicular step.
struct InsetEdges {
  std::vector<std::array<Vec2, 2>> inner;  // inner[i] = {start, end} of offset edge i
  std::vector<Vec2> polygon;               // inner boundary, CCW, steps included
};
InsetEdges inset_edges(const Polygon2D& poly, std::span<const double> distances);

// Ear clipping. Returns index triples into `pts` (CCW input); collinear
// vertices are consumed without emitting zero-area triangles.
std::vector<std::array<int, 3>> triangulate(std::span<const Vec2> pts);

// Sutherland-Hodgman clip of `subject` by convex CCW `clip`.
std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip);

// Area of the intersection of two simple CCW polygons.
double intersection_area(const Polygon2D& a, const Polygon2D& b);

// Convex hull (CCW). When the input is already a convex CCW polygon, its
// vertices are returned in their original order starting at vertex 0.
std::vector<Vec2> convex_hull(std::span<const Vec2> pts);

// Minimum-area enclosing rectangle. corners are CCW; side i runs from
// corners[i] to corners[i+1].
struct Rect2 {
  Vec2 center;
  std::array<Vec2, 4> corners;
  double side_length(int i) const { return (corners[(i + 1) % 4] - corners[i]).norm(); }
  Vec2 side_midpoint(int i) const { return 0.5 * (corners[i] + corners[(i + 1) % 4]); }
};
Rect2 min_area_rect(std::span<const Vec2> pts);

// Parametric overlap of two segments whose supporting lines coincide within
// `tol`. Parameters are arc lengths from each segment's start.
struct SegmentOverlap {
  double a0, a1;  // interval along segment a, a0 < a1
  double b0, b1;  // matching arc lengths along b (b0 corresponds to a0)
  double length() const { return a1 - a0; }
};
std::optional<SegmentOverlap> collinear_overlap(const Vec2& a_start, const Vec2& a_end, const Vec2& b_start,
                                                const Vec2& b_end, double tol, double min_length);

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b);

}  // namespace worldmesh
