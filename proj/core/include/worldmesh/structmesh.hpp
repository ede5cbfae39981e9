#pragma once

#include <span>
#include <vector>

#include "worldmesh/floorplan.hpp"
#include "worldmesh/geom/mesh.hpp"

namespace worldmesh {

inline constexpr double kDefaultSlabThickness = 0.05;
// Extra cutter depth beyond the wall faces it passes through.
inline constexpr double kCutterMargin = 1e-3;

struct StructOptions {
  double slab_thickness = kDefaultSlabThickness;
};

// Arc-length interval [s0, s1] on edge `edge` of one room that abuts a neighbour.
struct SharedSpan {
  int edge = 0;
  double s0 = 0;
  double s1 = 0;
  int neighbour = -1;
};

std::vector<SharedSpan> shared_spans(const std::vector<SharedEdge>& shared, int room_index);

// One straight piece of a room's wall ring: the floor-polygon sub-edge between
// consecutive split points and its inner (room-facing) face.
struct WallRun {
  int room = 0;
  int edge = 0;          // source floor-polygon edge
  double s0 = 0, s1 = 0; // arc-length interval on that edge
  double thickness = 0;  // local inset distance
  Vec2 outer_start, outer_end;
  Vec2 inner_start, inner_end;
  Vec2 inward;           // unit normal pointing into the room
  double height = 0;
};

std::vector<WallRun> wall_runs(const Room& room, int room_index, double wall_thickness,
                               std::span<const SharedSpan> shared);
std::vector<WallRun> wall_runs(const FloorPlan& plan);
// Room-facing outline traced through the inner faces of one room's runs.
Polygon2D inner_outline(const std::vector<WallRun>& runs, int room_index);

// Closed wall solid between the floor polygon and its per-run inset, z in
// [0, ceiling_height]; faces tagged {room.id, wall}.
TriMesh build_room_walls(const Room& room, double wall_thickness, std::span<const SharedSpan> shared);

// Box cutter for opening `index` of plan.rooms[room_index].
TriMesh opening_cutter(const FloorPlan& plan, const std::vector<SharedEdge>& shared, int room_index,
                       std::size_t index);

// Throws Error{kOpeningOutsideWall} when a cutter removes no wall material.
TriMesh carve_openings(const TriMesh& walls, const FloorPlan& plan, const std::vector<SharedEdge>& shared);

TriMesh build_floor_ceiling(const Room& room, double slab_thickness);

TriMesh assemble_struct_mesh(const FloorPlan& plan, const StructOptions& options = {});

}  // namespace worldmesh
