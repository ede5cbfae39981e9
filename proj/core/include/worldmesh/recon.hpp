#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "worldmesh/cameras.hpp"
#include "worldmesh/image.hpp"

namespace worldmesh {

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> colors;             // RGB in [0, 1]
  std::vector<std::uint32_t> source;    // index into source_ids
  std::vector<std::string> source_ids;  // camera ids

  std::size_t size() const { return points.size(); }
};

inline constexpr int kDefaultStride = 4;
inline constexpr double kDefaultVoxel = 0.02;

// One point per hit pixel center on the stride grid. Colors default to mid gray
// when `color` is null.
PointCloud backproject(const DepthMap& depth, const Camera& cam, const Image8* color = nullptr,
                       int stride = kDefaultStride, const std::string& camera_id = "");

// Canonical sort (position, color, source id), then the first point of every
// voxel cell is kept.
PointCloud merge_clouds(const std::vector<PointCloud>& clouds, double voxel = kDefaultVoxel);

// Binary little-endian PLY with float xyz and uchar rgb.
std::vector<std::uint8_t> encode_ply(const PointCloud& cloud);
PointCloud decode_ply(std::span<const std::uint8_t> bytes);
void write_ply(const std::filesystem::path& path, const PointCloud& cloud);

struct LossWeights {
  double lambda_s = 0.2;
  double lambda_d = 0.7;
};

struct LossBreakdown {
  double l1 = 0;
  double dssim = 0;
  double depth_l1 = 0;
  double total = 0;
  LossWeights weights;

  std::string to_json() const;
};

// Mean SSIM over channels: 11x11 Gaussian window (sigma 1.5), zero padding,
// C1 = 0.01^2, C2 = 0.03^2 for values in [0, 1].
double ssim(const ImageF& a, const ImageF& b);

// total = (1 - ls) l1 + ls (1 - SSIM) + ld depth_l1, depth over pixels valid in
// both maps. Throws Error{kDimensionMismatch} and Error{kNoValidDepthPixels}.
LossBreakdown loss_eval(const ImageF& rendered, const ImageF& target, const DepthMap& rendered_depth,
                        const DepthMap& target_depth, const LossWeights& weights = {});

}  // namespace worldmesh
