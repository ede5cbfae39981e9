#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "worldmesh/image.hpp"

namespace worldmesh {

struct EdgeMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // 1 = edge

  EdgeMap() = default;
  EdgeMap(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}
  std::uint8_t& at(int x, int y) { return bits[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x]; }
  std::size_t count() const;
  bool operator==(const EdgeMap&) const = default;
};

struct CannyThresholds {
  double low = 0.05;
  double high = 0.15;
};

inline constexpr double kCannySigma = 1.4;
inline constexpr int kDefaultDilation = 10;
inline constexpr double kDefaultRecallThreshold = 0.6;

// Canny on depth normalized to [0, 1] over its hit range; no-hit pixels take
// the far value. Thresholds apply to the raw 3x3 Sobel response (8x the
// per-pixel derivative) of the normalized depth.
EdgeMap depth_edges(const DepthMap& depth, const CannyThresholds& t = {});

// Square (L-infinity) structuring element of radius `delta`.
EdgeMap dilate(const EdgeMap& edges, int delta);

struct RecallCounts {
  std::size_t mesh_edge_pixels = 0;
  std::size_t matched_pixels = 0;
  double recall() const;
};

// |mesh ∩ dilate(est, delta)| / |mesh|, 1 when mesh is empty.
RecallCounts edge_recall_counts(const EdgeMap& mesh_edges, const EdgeMap& est_edges, int delta);
double edge_recall(const EdgeMap& mesh_edges, const EdgeMap& est_edges, int delta);

// Monocular depth estimator behind an adapter. Implementations throw
// Error{kAdapterFailure}.
class DepthAdapter {
 public:
  virtual ~DepthAdapter() = default;
  virtual DepthMap estimate(const Image8& image) = 0;
};

// Returns depth maps previously stored under the SHA-256 of the image's PNG
// encoding (<dir>/<hash>.pfm).
class StoredDepthAdapter : public DepthAdapter {
 public:
  explicit StoredDepthAdapter(std::filesystem::path dir) : dir_(std::move(dir)) {}
  void put(const Image8& image, const DepthMap& depth);
  DepthMap estimate(const Image8& image) override;
  static std::string key(const Image8& image);

 private:
  std::filesystem::path dir_;
};

class ConstantDepthAdapter : public DepthAdapter {
 public:
  explicit ConstantDepthAdapter(double value) : value_(value) {}
  DepthMap estimate(const Image8& image) override;

 private:
  double value_;
};

// Returns the map last passed to set(); the pipeline's mock estimator, fed
// with the scaffold depth of the view under test.
class EchoDepthAdapter : public DepthAdapter {
 public:
  void set(DepthMap depth) { depth_ = std::move(depth); }
  DepthMap estimate(const Image8& image) override;

 private:
  DepthMap depth_;
};

// Pipes the PNG to a shell command that prints a PFM depth map.
class CommandDepthAdapter : public DepthAdapter {
 public:
  explicit CommandDepthAdapter(std::string command) : command_(std::move(command)) {}
  DepthMap estimate(const Image8& image) override;

 private:
  std::string command_;
};

// POST {"image_png": base64} and expect {"depth_pfm": base64}.
class HttpDepthAdapter : public DepthAdapter {
 public:
  explicit HttpDepthAdapter(std::string url) : url_(std::move(url)) {}
  DepthMap estimate(const Image8& image) override;

 private:
  std::string url_;
};

struct VerifyOptions {
  CannyThresholds canny;
  int delta = kDefaultDilation;
  double threshold = kDefaultRecallThreshold;
};

struct VerificationResult {
  double recall = 0;
  double threshold = 0;
  bool pass = false;
  std::size_t mesh_edge_pixels = 0;
  std::size_t matched_pixels = 0;
};

VerificationResult verify_depths(const DepthMap& scaffold, const DepthMap& estimated, const VerifyOptions& opts = {});
VerificationResult verify_image(const Image8& generated, const DepthMap& scaffold, DepthAdapter& adapter,
                                const VerifyOptions& opts = {});

}  // namespace worldmesh
