#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "worldmesh/geom/mesh.hpp"
#include "worldmesh/image.hpp"

namespace worldmesh {

// Binary glTF 2.0. World space is +z up; files are written +y up (x, z, -y)
// and converted back on import. Internal uvs have v pointing up (origin at the
// image's bottom-left); TEXCOORD_0 stores 1 - v as glTF expects.

using TextureMap = std::map<FaceTag, Image8>;

// One primitive per distinct face tag, in order of first appearance. Groups with
// an entry in `textures` carry TEXCOORD_0 and an embedded PNG.
std::vector<std::uint8_t> encode_glb(const TriMesh& mesh, const TextureMap& textures = {});
// Also writes "<stem>.tags.json" next to `path` mapping primitive index to tag.
void export_glb(const TriMesh& mesh, const std::filesystem::path& path, const TextureMap& textures = {});
std::string glb_tag_manifest(const TriMesh& mesh);

struct GlbPrimitive {
  FaceTag tag;
  TriMesh mesh;  // node transforms applied, world +z up
  std::optional<Image8> texture;
};

std::vector<GlbPrimitive> decode_glb(std::span<const std::uint8_t> bytes);
std::vector<GlbPrimitive> import_glb(const std::filesystem::path& path);
// Concatenation of all primitives; tags taken from the file when present.
TriMesh merge_primitives(const std::vector<GlbPrimitive>& prims);

}  // namespace worldmesh
