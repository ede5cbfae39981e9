#include "worldmesh/recon.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>
#include <tuple>
#include <unordered_set>

#include <json.hpp>

#include "worldmesh/error.hpp"

namespace worldmesh {

PointCloud backproject(const DepthMap& depth, const Camera& cam, const Image8* color, int stride,
                       const std::string& camera_id) {
  if (stride < 1) throw Error(ErrorCode::kInvalidArgument, "stride must be at least 1");
  if (depth.width != cam.width || depth.height != cam.height)
    throw Error(ErrorCode::kDimensionMismatch, "depth map does not match the camera");
  if (color && (color->width != cam.width || color->height != cam.height))
    throw Error(ErrorCode::kDimensionMismatch, "color image does not match the camera");
  PointCloud pc;
  pc.source_ids = {camera_id};
  for (int y = 0; y < depth.height; y += stride)
    for (int x = 0; x < depth.width; x += stride) {
      if (!depth.hit(x, y)) continue;
      pc.points.push_back(cam.unproject(x + 0.5, y + 0.5, depth.at(x, y)));
      Vec3 c = Vec3::Constant(0.5);
      if (color)
        for (int k = 0; k < 3; ++k) c[k] = color->at(x, y, std::min(k, color->channels - 1)) / 255.0;
      pc.colors.push_back(c);
      pc.source.push_back(0);
    }
  return pc;
}

PointCloud merge_clouds(const std::vector<PointCloud>& clouds, double voxel) {
  if (!(voxel > 0)) throw Error(ErrorCode::kInvalidArgument, "voxel size must be positive");
  std::set<std::string> names;
  for (const PointCloud& c : clouds) names.insert(c.source_ids.begin(), c.source_ids.end());
  PointCloud out;
  out.source_ids.assign(names.begin(), names.end());
  struct Item {
    Vec3 p, c;
    std::uint32_t s;
  };
  std::vector<Item> items;
  for (const PointCloud& c : clouds)
    for (std::size_t i = 0; i < c.size(); ++i) {
      const auto& name = c.source_ids[c.source[i]];
      const auto s = static_cast<std::uint32_t>(std::distance(names.begin(), names.find(name)));
      items.push_back({c.points[i], c.colors[i], s});
    }
  auto key = [](const Item& it) {
    return std::make_tuple(it.p.x(), it.p.y(), it.p.z(), it.c.x(), it.c.y(), it.c.z(), it.s);
  };
  std::sort(items.begin(), items.end(), [&](const Item& a, const Item& b) { return key(a) < key(b); });
  struct CellHash {
    std::size_t operator()(const std::array<std::int64_t, 3>& k) const {
      std::size_t h = 1469598103934665603ull;
      for (auto v : k) h = (h ^ static_cast<std::size_t>(v)) * 1099511628211ull;
      return h;
    }
  };
  std::unordered_set<std::array<std::int64_t, 3>, CellHash> seen;
  for (const Item& it : items) {
    std::array<std::int64_t, 3> cell{};
    for (int k = 0; k < 3; ++k) cell[static_cast<std::size_t>(k)] = static_cast<std::int64_t>(std::floor(it.p[k] / voxel));
    if (!seen.insert(cell).second) continue;
    out.points.push_back(it.p);
    out.colors.push_back(it.c);
    out.source.push_back(it.s);
  }
  return out;
}

std::vector<std::uint8_t> encode_ply(const PointCloud& cloud) {
  const std::string header = "ply\nformat binary_little_endian 1.0\nelement vertex " + std::to_string(cloud.size()) +
                             "\nproperty float x\nproperty float y\nproperty float z\n"
                             "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + cloud.size() * 15);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int k = 0; k < 3; ++k) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(cloud.points[i][k]));
      for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>((bits >> (8 * b)) & 0xff));
    }
    for (int k = 0; k < 3; ++k)
      out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(cloud.colors[i][k], 0.0, 1.0) * 255.0)));
  }
  return out;
}

PointCloud decode_ply(std::span<const std::uint8_t> bytes) {
  const std::string text(bytes.begin(), bytes.end());
  const std::string end = "end_header\n";
  const auto pos = text.find(end);
  if (text.rfind("ply\nformat binary_little_endian 1.0\n", 0) != 0 || pos == std::string::npos)
    throw Error(ErrorCode::kIoError, "not a binary little-endian PLY");
  const auto ve = text.find("element vertex ");
  if (ve == std::string::npos || ve > pos) throw Error(ErrorCode::kIoError, "PLY has no vertex element");
  const std::size_t n = std::stoull(text.substr(ve + 15));
  const std::size_t body = pos + end.size();
  if (bytes.size() < body + n * 15) throw Error(ErrorCode::kIoError, "PLY body is truncated");
  PointCloud pc;
  pc.source_ids = {""};
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* p = bytes.data() + body + i * 15;
    Vec3 v;
    for (int k = 0; k < 3; ++k) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[4 * k + b]) << (8 * b);
      v[k] = std::bit_cast<float>(bits);
    }
    pc.points.push_back(v);
    pc.colors.push_back(Vec3(p[12], p[13], p[14]) / 255.0);
    pc.source.push_back(0);
  }
  return pc;
}

void write_ply(const std::filesystem::path& path, const PointCloud& cloud) { write_file(path, encode_ply(cloud)); }

std::string LossBreakdown::to_json() const {
  nlohmann::ordered_json j{{"l1", l1},
                           {"dssim", dssim},
                           {"depth_l1", depth_l1},
                           {"total", total},
                           {"lambda_s", weights.lambda_s},
                           {"lambda_d", weights.lambda_d}};
  return j.dump(2) + "\n";
}

namespace {

// Zero-padded separable Gaussian filter of one channel.
std::vector<double> gauss_filter(const std::vector<double>& in, int w, int h) {
  constexpr int r = 5;
  constexpr double sigma = 1.5;
  std::array<double, 2 * r + 1> k{};
  double sum = 0;
  for (int i = -r; i <= r; ++i) sum += k[static_cast<std::size_t>(i + r)] = std::exp(-(i * i) / (2 * sigma * sigma));
  for (double& v : k) v /= sum;
  std::vector<double> tmp(in.size(), 0.0), out(in.size(), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i) {
        const int u = x + i;
        if (u >= 0 && u < w) acc += k[static_cast<std::size_t>(i + r)] * in[static_cast<std::size_t>(y) * w + u];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i) {
        const int v = y + i;
        if (v >= 0 && v < h) acc += k[static_cast<std::size_t>(i + r)] * tmp[static_cast<std::size_t>(v) * w + x];
      }
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  return out;
}

}  // namespace

double ssim(const ImageF& a, const ImageF& b) {
  if (!a.same_shape(b)) throw Error(ErrorCode::kDimensionMismatch, "images differ in size");
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const int w = a.width, h = a.height;
  const std::size_t n = a.pixel_count();
  if (n == 0) throw Error(ErrorCode::kDimensionMismatch, "empty images");
  double total = 0;
  for (int ch = 0; ch < a.channels; ++ch) {
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = a.data[i * static_cast<std::size_t>(a.channels) + static_cast<std::size_t>(ch)];
      y[i] = b.data[i * static_cast<std::size_t>(b.channels) + static_cast<std::size_t>(ch)];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = gauss_filter(x, w, h), my = gauss_filter(y, w, h);
    const auto sxx = gauss_filter(xx, w, h), syy = gauss_filter(yy, w, h), sxy = gauss_filter(xy, w, h);
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cov = sxy[i] - mx[i] * my[i];
      acc += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) / ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += acc / static_cast<double>(n);
  }
  return total / a.channels;
}

LossBreakdown loss_eval(const ImageF& rendered, const ImageF& target, const DepthMap& rendered_depth,
                        const DepthMap& target_depth, const LossWeights& weights) {
  if (!rendered.same_shape(target)) throw Error(ErrorCode::kDimensionMismatch, "images differ in size");
  if (rendered_depth.width != target_depth.width || rendered_depth.height != target_depth.height ||
      rendered_depth.width != rendered.width || rendered_depth.height != rendered.height)
    throw Error(ErrorCode::kDimensionMismatch, "depth maps do not match the images");
  LossBreakdown out;
  out.weights = weights;
  double sum = 0;
  for (std::size_t i = 0; i < rendered.data.size(); ++i) sum += std::abs(rendered.data[i] - target.data[i]);
  out.l1 = sum / static_cast<double>(rendered.data.size());
  out.dssim = 1.0 - ssim(rendered, target);
  double dsum = 0;
  std::size_t valid = 0;
  for (std::size_t i = 0; i < rendered_depth.values.size(); ++i) {
    const double a = rendered_depth.values[i], b = target_depth.values[i];
    if (!std::isfinite(a) || !std::isfinite(b)) continue;
    dsum += std::abs(a - b);
    ++valid;
  }
  if (valid == 0) throw Error(ErrorCode::kNoValidDepthPixels, "no pixel has depth in both maps");
  out.depth_l1 = dsum / static_cast<double>(valid);
  out.total = (1.0 - weights.lambda_s) * out.l1 + weights.lambda_s * out.dssim + weights.lambda_d * out.depth_l1;
  return out;
}

}  // namespace worldmesh
