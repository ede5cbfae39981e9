#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace worldmesh {

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);
std::string sha256_file(const std::filesystem::path& path);

// 64-bit mix used to derive per-attempt seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace worldmesh
