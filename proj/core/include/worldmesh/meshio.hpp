#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "worldmesh/geom/mesh.hpp"

namespace worldmesh {

// Lossless little-endian binary TriMesh (double coordinates, tags, uvs) used
// for intermediate pipeline artifacts; GLB is float32.
std::vector<std::uint8_t> encode_mesh(const TriMesh& mesh);
// Throws Error{kSchemaError} on malformed input.
TriMesh decode_mesh(std::span<const std::uint8_t> bytes);
void write_mesh(const std::filesystem::path& path, const TriMesh& mesh);
TriMesh read_mesh(const std::filesystem::path& path);

}  // namespace worldmesh
