#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "worldmesh/cameras.hpp"
#include "worldmesh/geom/mesh.hpp"
#include "worldmesh/image.hpp"
#include "worldmesh/texproj.hpp"

namespace worldmesh {

// Per-pixel visibility: nearest face and its barycentrics (weights of the
// face's corners 0, 1, 2) at the pixel center.
struct RasterBuffers {
  int width = 0;
  int height = 0;
  std::vector<double> depth;      // camera-space z, kNoHit where empty
  std::vector<std::int32_t> face; // -1 where empty
  std::vector<Vec3> bary;

  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
};

// Top-left fill rule, perspective-correct interpolation, no culling. On equal
// depth the lower face index wins.
RasterBuffers rasterize(const TriMesh& scene, const Camera& cam);

DepthMap render_depth(const TriMesh& scene, const Camera& cam);

struct DepthRange {
  double near = 0.2;
  double far = 12.0;
};

// Linear near -> 255, far -> 0, clamped; no-hit -> 0.
Image8 encode_depth_gray(const DepthMap& depth, const DepthRange& range = {});

enum class Provenance : std::uint8_t { kBackground = 0, kDepthGray = 1, kWallTexture = 2, kObjectTexture = 3 };

struct ConditionImage {
  Image8 rgb;         // 3 channels
  Image8 provenance;  // 1 channel, Provenance codes

  std::size_t count(Provenance p) const;
};

using ObjectTextures = std::map<std::string, Image8>;  // keyed by object id

ConditionImage render_condition(const TriMesh& scene, const Camera& cam, const TextureAtlas& atlas,
                                const ObjectTextures& object_textures = {}, const DepthRange& range = {});

// Like render_condition, but pixels that would be depth gray get a flat
// diagnostic color and untextured objects do not throw.
Image8 render_color(const TriMesh& scene, const Camera& cam, const TextureAtlas& atlas,
                    const ObjectTextures& object_textures = {}, const DepthRange& range = {});

inline constexpr std::array<std::uint8_t, 3> kDiagnosticStructure = {196, 180, 150};
inline constexpr std::array<std::uint8_t, 3> kDiagnosticObject = {70, 130, 200};

}  // namespace worldmesh
