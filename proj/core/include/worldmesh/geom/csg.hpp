#pragma once

#include "worldmesh/geom/mesh.hpp"

namespace worldmesh {

// base minus the volume of a convex cutter.
//
// Base faces are split by the cutter's planes and dropped where the material
// behind them lies inside the cutter; cutter faces are split by the base faces
// they touch and kept (reversed) where the region in front of them lies inside
// the base. Faces of the base that do not touch the cutter keep their vertex
// indices. New cut faces take the tag of the base solid they close, found by
// per-tag winding numbers.
//
// Throws Error{kNonManifoldInput} when a base edge near the cutter is shared by
// more than two triangles, Error{kInvalidArgument} when the cutter is not convex.
TriMesh mesh_subtract(const TriMesh& base, const TriMesh& cutter);

}  // namespace worldmesh
