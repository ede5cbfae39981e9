#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "worldmesh/cameras.hpp"
#include "worldmesh/floorplan.hpp"
#include "worldmesh/geom/mesh.hpp"
#include "worldmesh/glb.hpp"
#include "worldmesh/image.hpp"

namespace worldmesh {

inline constexpr double kDefaultTexelDensity = 64.0;
inline constexpr double kOcclusionTau = 0.10;

// Rectangular texel grid over one planar structural surface. Texel (i, j) has
// column i along u_axis and row j counted from the top (largest v).
struct Chart {
  std::string surface_id;
  std::string room_id;
  Category category = Category::kWall;
  Vec3 origin = Vec3::Zero();
  Vec3 u_axis = Vec3::UnitX();
  Vec3 v_axis = Vec3::UnitZ();
  Vec3 normal = Vec3::UnitY();  // points into the room
  double width_m = 0, height_m = 0;
  double texels_per_meter = kDefaultTexelDensity;
  int w = 0, h = 0;
  Image8 color;                     // RGB
  std::vector<double> confidence;   // 0 = never written
  std::vector<double> best_cosine;  // incidence cosine of the winning view
  std::vector<std::uint8_t> mask;   // 1 where the texel lies on mesh surface

  double du() const { return width_m / w; }
  double dv() const { return height_m / h; }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * static_cast<std::size_t>(w) + static_cast<std::size_t>(i); }
  Vec3 texel_center(int i, int j) const;
  // Surface parameters of a world point (meters along u and v).
  Vec2 params(const Vec3& p) const { return {(p - origin).dot(u_axis), (p - origin).dot(v_axis)}; }
  // Texel containing a world point, clamped to the grid.
  std::pair<int, int> texel_of(const Vec3& p) const;
  bool on_plane(const Vec3& p, const Vec3& face_normal) const;
  std::size_t coverage() const;
};

struct TextureAtlas {
  std::vector<Chart> charts;

  std::size_t coverage() const;  // texels with confidence > 0
  // Chart index for each face of `mesh` (-1 for faces without a chart).
  std::vector<int> assign_faces(const TriMesh& mesh) const;
  bool operator==(const TextureAtlas& o) const;
};

// One chart per inner wall run plus one floor and one ceiling chart per room;
// masks are rasterized from the matching faces of `mesh`.
TextureAtlas build_atlas(const FloorPlan& plan, const TriMesh& mesh, double texels_per_meter = kDefaultTexelDensity);

// (p_x / W, 1 - p_y / H); nullopt outside the image. Throws Error{kBehindCamera}.
std::optional<Vec2> vertex_uv(const Vec3& world, const Camera& cam);

struct ProjectOptions {
  double tau = kOcclusionTau;
};

// Projects `image` into the charts of `room_id` with the back-face, occlusion,
// room and in-image filters. Returns the number of texels written.
std::size_t project_image(const TriMesh& scene, const Camera& cam, const Image8& image, const DepthMap& depth,
                          const std::string& room_id, TextureAtlas& atlas, const ProjectOptions& opts = {});

struct View {
  Camera cam;
  Image8 image;
  DepthMap depth;
};

void accumulate_views(const TriMesh& scene, const std::vector<View>& views, TextureAtlas& atlas,
                      const ProjectOptions& opts = {});

// Writes <surface>.png, <surface>.conf.png, <surface>.conf.bin and charts.json.
void save_atlas(const TextureAtlas& atlas, const std::filesystem::path& dir);
TextureAtlas load_atlas(const std::filesystem::path& dir);

// Per-face uvs into packed per-group images for GLB export. Structural faces
// without a chart map to a neutral texel row. Object groups are textured from
// `object_textures` (keyed by object id) using the mesh's own uvs.
struct BakedMesh {
  TriMesh mesh;
  TextureMap textures;
};
BakedMesh bake_atlas(const TriMesh& mesh, const TextureAtlas& atlas,
                     const std::map<std::string, Image8>& object_textures = {});

}  // namespace worldmesh
