#include "worldmesh/verify.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include <json.hpp>

#include "worldmesh/error.hpp"
#include "worldmesh/hash.hpp"
#include "worldmesh/transport.hpp"

namespace worldmesh {

namespace {

using Plane = std::vector<double>;

Plane normalized_depth(const DepthMap& d) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : d.values)
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  Plane out(d.values.size(), 0.0);
  if (!(hi > lo)) return out;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::isfinite(d.values[i]) ? (d.values[i] - lo) / (hi - lo) : 1.0;
  return out;
}

Plane gaussian_blur(const Plane& in, int w, int h, double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0;
  for (int i = -r; i <= r; ++i) sum += k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k) v /= sum;
  Plane tmp(in.size()), out(in.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i)
        acc += k[static_cast<std::size_t>(i + r)] * in[static_cast<std::size_t>(y) * w + std::clamp(x + i, 0, w - 1)];
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i)
        acc += k[static_cast<std::size_t>(i + r)] * tmp[static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w + x];
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  return out;
}

}  // namespace

std::size_t EdgeMap::count() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1)); }

EdgeMap depth_edges(const DepthMap& depth, const CannyThresholds& t) {
  const int w = depth.width, h = depth.height;
  EdgeMap out(w, h);
  if (w == 0 || h == 0) return out;
  const Plane s = gaussian_blur(normalized_depth(depth), w, h, kCannySigma);
  auto px = [&](int x, int y) { return s[static_cast<std::size_t>(std::clamp(y, 0, h - 1)) * w + std::clamp(x, 0, w - 1)]; };
  Plane mag(s.size()), gx(s.size()), gy(s.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      gx[i] = (px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1)) - (px(x - 1, y - 1) + 2 * px(x - 1, y) + px(x - 1, y + 1));
      gy[i] = (px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1)) - (px(x - 1, y - 1) + 2 * px(x, y - 1) + px(x + 1, y - 1));
      mag[i] = std::hypot(gx[i], gy[i]);
    }
  auto m = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= w || y >= h) return 0.0;
    return mag[static_cast<std::size_t>(y) * w + x];
  };
  // Non-maximum suppression along the quantized gradient direction; ties go to
  // the pixel on the positive side so plateaus stay one pixel wide.
  std::vector<std::uint8_t> cls(s.size(), 0);  // 1 weak, 2 strong
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double g = mag[i];
      if (!(g > 0) || g < t.low) continue;
      double angle = std::atan2(gy[i], gx[i]) * 180.0 / 3.14159265358979323846;
      if (angle < 0) angle += 180.0;
      int dx, dy;
      if (angle < 22.5 || angle >= 157.5) {
        dx = 1;
        dy = 0;
      } else if (angle < 67.5) {
        dx = 1;
        dy = 1;
      } else if (angle < 112.5) {
        dx = 0;
        dy = 1;
      } else {
        dx = -1;
        dy = 1;
      }
      if (!(g >= m(x - dx, y - dy) && g > m(x + dx, y + dy))) continue;
      cls[i] = g >= t.high ? 2 : 1;
    }
  std::deque<std::pair<int, int>> queue;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (cls[static_cast<std::size_t>(y) * w + x] == 2) {
        out.at(x, y) = 1;
        queue.emplace_back(x, y);
      }
  while (!queue.empty()) {
    auto [x, y] = queue.front();
    queue.pop_front();
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int u = x + dx, v = y + dy;
        if (u < 0 || v < 0 || u >= w || v >= h || out.at(u, v)) continue;
        if (cls[static_cast<std::size_t>(v) * w + u] == 1) {
          out.at(u, v) = 1;
          queue.emplace_back(u, v);
        }
      }
  }
  return out;
}

EdgeMap dilate(const EdgeMap& edges, int delta) {
  if (delta <= 0) return edges;
  const int w = edges.width, h = edges.height;
  EdgeMap rows(w, h), out(w, h);
  std::vector<int> prefix(static_cast<std::size_t>(std::max(w, h)) + 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) prefix[static_cast<std::size_t>(x) + 1] = prefix[static_cast<std::size_t>(x)] + edges.at(x, y);
    for (int x = 0; x < w; ++x)
      rows.at(x, y) = prefix[static_cast<std::size_t>(std::min(w, x + delta + 1))] > prefix[static_cast<std::size_t>(std::max(0, x - delta))];
  }
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) prefix[static_cast<std::size_t>(y) + 1] = prefix[static_cast<std::size_t>(y)] + rows.at(x, y);
    for (int y = 0; y < h; ++y)
      out.at(x, y) = prefix[static_cast<std::size_t>(std::min(h, y + delta + 1))] > prefix[static_cast<std::size_t>(std::max(0, y - delta))];
  }
  return out;
}

double RecallCounts::recall() const {
  return mesh_edge_pixels == 0 ? 1.0 : static_cast<double>(matched_pixels) / static_cast<double>(mesh_edge_pixels);
}

RecallCounts edge_recall_counts(const EdgeMap& mesh_edges, const EdgeMap& est_edges, int delta) {
  if (mesh_edges.width != est_edges.width || mesh_edges.height != est_edges.height)
    throw Error(ErrorCode::kDimensionMismatch, "edge maps differ in size");
  const EdgeMap grown = dilate(est_edges, delta);
  RecallCounts c;
  for (std::size_t i = 0; i < mesh_edges.bits.size(); ++i)
    if (mesh_edges.bits[i]) {
      ++c.mesh_edge_pixels;
      c.matched_pixels += grown.bits[i];
    }
  return c;
}

double edge_recall(const EdgeMap& mesh_edges, const EdgeMap& est_edges, int delta) {
  return edge_recall_counts(mesh_edges, est_edges, delta).recall();
}

std::string StoredDepthAdapter::key(const Image8& image) { return sha256_hex(encode_png(image)); }

void StoredDepthAdapter::put(const Image8& image, const DepthMap& depth) {
  write_pfm(dir_ / (key(image) + ".pfm"), depth);
}

DepthMap StoredDepthAdapter::estimate(const Image8& image) {
  const auto path = dir_ / (key(image) + ".pfm");
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::kAdapterFailure, "no stored depth for image " + path.stem().string());
  return read_pfm(path);
}

DepthMap ConstantDepthAdapter::estimate(const Image8& image) { return DepthMap(image.width, image.height, value_); }

DepthMap EchoDepthAdapter::estimate(const Image8& image) {
  if (depth_.width != image.width || depth_.height != image.height)
    throw Error(ErrorCode::kAdapterFailure, "echo depth does not match the image size");
  return depth_;
}

namespace {

DepthMap decode_adapter_depth(std::span<const std::uint8_t> bytes) {
  try {
    return decode_pfm(bytes);
  } catch (const Error& e) {
    throw Error(ErrorCode::kAdapterFailure, std::string("depth adapter returned an unreadable map: ") + e.what());
  }
}

}  // namespace

DepthMap CommandDepthAdapter::estimate(const Image8& image) {
  const auto png = encode_png(image);
  const std::string out = run_command(command_, std::string(png.begin(), png.end()));
  return decode_adapter_depth(std::span(reinterpret_cast<const std::uint8_t*>(out.data()), out.size()));
}

DepthMap HttpDepthAdapter::estimate(const Image8& image) {
  nlohmann::json req{{"image_png", base64_encode(encode_png(image))}};
  const std::string body = http_post(url_, "application/json", req.dump());
  try {
    auto res = nlohmann::json::parse(body);
    return decode_adapter_depth(base64_decode(res.at("depth_pfm").get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kAdapterFailure, std::string("malformed depth response: ") + e.what());
  }
}

VerificationResult verify_depths(const DepthMap& scaffold, const DepthMap& estimated, const VerifyOptions& opts) {
  if (scaffold.width != estimated.width || scaffold.height != estimated.height)
    throw Error(ErrorCode::kAdapterFailure, "estimated depth does not match the image size");
  const RecallCounts c =
      edge_recall_counts(depth_edges(scaffold, opts.canny), depth_edges(estimated, opts.canny), opts.delta);
  VerificationResult r;
  r.recall = c.recall();
  r.threshold = opts.threshold;
  r.pass = r.recall > opts.threshold;
  r.mesh_edge_pixels = c.mesh_edge_pixels;
  r.matched_pixels = c.matched_pixels;
  return r;
}

VerificationResult verify_image(const Image8& generated, const DepthMap& scaffold, DepthAdapter& adapter,
                                const VerifyOptions& opts) {
  return verify_depths(scaffold, adapter.estimate(generated), opts);
}

}  // namespace worldmesh
