#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "worldmesh/cameras.hpp"
#include "worldmesh/floorplan.hpp"
#include "worldmesh/geom/mesh.hpp"
#include "worldmesh/geom/obb.hpp"
#include "worldmesh/image.hpp"

namespace worldmesh {

enum class Placement { kFloorStanding, kFlat, kWallMounted, kCeilingHung };

std::string_view to_string(Placement p);
Placement placement_from_string(std::string_view s);

// Canonical object frame -> source camera frame.
struct Pose {
  Quat rotation = Quat::Identity();
  Vec3 translation = Vec3::Zero();
};

struct ReconstructedObject {
  std::string id;
  std::string label;
  TriMesh mesh;  // canonical frame
  Pose pose;
  Camera source_camera;
  std::optional<Image8> texture;
};

struct PlacedObject {
  std::string id;
  std::string label;
  std::string room_id;
  Placement placement = Placement::kFloorStanding;
  std::string support;  // "floor", "ceiling", "wall/<k>" or an object id
  TriMesh mesh;         // world frame
  bool unresolved_overlap = false;
};

struct PlacementTable {
  struct Entry {
    Placement placement = Placement::kFloorStanding;
    std::optional<double> mount_height;
  };
  std::map<std::string, Entry> labels;
  double flat_aspect_ratio = 0.05;
  double flat_axis_min_z = 0.966;  // |z| of the thinnest axis for "near horizontal"
  double default_mount_height = 1.5;

  static PlacementTable defaults();  // the shipped placement_labels.json
  static PlacementTable parse(std::string_view json_text);
  double mount_height(const std::string& label) const;
};

// cam_to_world ∘ pose ∘ canonical.
TriMesh to_world(const ReconstructedObject& obj);

Placement classify_placement(const std::string& label, const Obb& obb, const PlacementTable& table = PlacementTable::defaults());

// Rotates the mesh about its OBB center so the most downward OBB face normal
// becomes (0, 0, -1). Throws Error{kDegenerateObb}.
TriMesh level_to_ground(const TriMesh& mesh);

enum class SupportDirection { kDown, kUp };

struct SupportResult {
  TriMesh mesh;
  std::string support;
};

// Fraction of the smaller XY footprint that must be covered before an object
// is stacked on a previously placed one.
inline constexpr double kStackOverlapFraction = 0.25;

// Translates along z until the mesh touches the nearest support found by
// vertical rays over its footprint: upward-facing floor faces (down) or
// downward-facing ceiling faces (up). `placed` objects join the candidate
// supports when their footprint overlap qualifies for stacking. Throws
// Error{kNoSupportFound}.
SupportResult drop_to_support(const TriMesh& mesh, const TriMesh& scene, SupportDirection dir,
                              const std::vector<PlacedObject>& placed = {});

// Moves the mesh horizontally until its back is flush with the nearest inner
// wall face of `room_index`, centered vertically at `mount_height`. Ties go to
// the lower run index. Throws Error{kNoWallFound}.
SupportResult attach_to_wall(const TriMesh& mesh, const FloorPlan& plan, int room_index, double mount_height);

struct ConflictReport {
  int iterations = 0;
  std::vector<std::pair<std::string, std::string>> unresolved;
};

// Separates overlapping floor-standing objects of one room (XY AABBs), larger
// footprints first; shifts never increase the total pairwise overlap.
ConflictReport resolve_conflicts(std::vector<PlacedObject>& objects, const FloorPlan& plan, int room_index);

double footprint_overlap(const TriMesh& a, const TriMesh& b);

struct PlacementEntry {
  std::string object_id;
  std::string label;
  std::string room_id;
  std::string status;  // "placed" or "skipped"
  std::string placement;
  std::string support;
  std::string error;
};

struct GeoResult {
  TriMesh mesh;
  std::vector<PlacedObject> objects;
  std::vector<PlacementEntry> report;
  std::map<std::string, Image8> textures;  // by object id

  std::string report_json(const std::string& room_id) const;
};

// Places every object (to_world, classify, level, drop or attach, resolve) and
// merges the results into a copy of `struct_mesh`. Objects that fail are
// skipped and reported.
GeoResult build_m_geo(const FloorPlan& plan, const TriMesh& struct_mesh,
                      const std::map<std::string, std::vector<ReconstructedObject>>& objects_by_room,
                      const PlacementTable& table = PlacementTable::defaults());

// Object manifest: {"objects": [{object_id, label, source_camera_id,
// pose: {quat_wxyz, translation}}]} with meshes in <dir>/<object_id>.glb.
// Camera ids resolve through `cameras`. Object GLBs are read in their own
// glTF frame: the pose maps raw file coordinates into the camera frame.
std::vector<ReconstructedObject> load_objects(const std::filesystem::path& dir,
                                              const std::map<std::string, Camera>& cameras);

// Inverse of the z-up conversion applied on GLB import.
TriMesh to_gltf_frame(const TriMesh& mesh);
TriMesh from_gltf_frame(const TriMesh& mesh);

}  // namespace worldmesh
