#include "worldmesh/render.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "worldmesh/parallel.hpp"

namespace worldmesh {

namespace {

constexpr double kNearClip = 1e-4;

struct ClipVertex {
  Vec3 q;     // camera space
  Vec3 bary;  // weights of the source face corners
};

struct ScreenTri {
  std::int32_t face;
  Vec2 s[3];
  double invz[3];
  Vec3 bary_over_z[3];
  int y0, y1;  // inclusive row range
  double x_lo, x_hi;
};

double edge(const Vec2& a, const Vec2& b, const Vec2& p) {
  return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
}

bool top_left(const Vec2& a, const Vec2& b) {
  const Vec2 d = b - a;
  return (d.y() == 0 && d.x() > 0) || d.y() < 0;
}

std::vector<ScreenTri> setup(const TriMesh& scene, const Camera& cam) {
  std::vector<Vec3> q(scene.vertices.size());
  for (std::size_t v = 0; v < q.size(); ++v) q[v] = cam.to_camera(scene.vertices[v]);
  std::vector<ScreenTri> out;
  out.reserve(scene.triangle_count());
  const Vec3 unit[3] = {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
  for (std::size_t f = 0; f < scene.triangle_count(); ++f) {
    std::vector<ClipVertex> poly;
    for (int k = 0; k < 3; ++k) poly.push_back({q[scene.triangles[f][static_cast<std::size_t>(k)]], unit[k]});
    // Keep the part with depth (-z) >= kNearClip.
    std::vector<ClipVertex> clipped;
    for (std::size_t k = 0; k < poly.size(); ++k) {
      const ClipVertex& a = poly[k];
      const ClipVertex& b = poly[(k + 1) % poly.size()];
      const double da = -a.q.z() - kNearClip, db = -b.q.z() - kNearClip;
      if (da >= 0) clipped.push_back(a);
      if ((da >= 0) != (db >= 0)) {
        const double t = da / (da - db);
        clipped.push_back({a.q + (b.q - a.q) * t, a.bary + (b.bary - a.bary) * t});
      }
    }
    if (clipped.size() < 3) continue;
    std::vector<Vec2> s(clipped.size());
    for (std::size_t k = 0; k < clipped.size(); ++k) s[k] = cam.project_camera(clipped[k].q);
    for (std::size_t k = 1; k + 1 < clipped.size(); ++k) {
      std::size_t idx[3] = {0, k, k + 1};
      ScreenTri t;
      t.face = static_cast<std::int32_t>(f);
      for (int m = 0; m < 3; ++m) {
        const ClipVertex& cv = clipped[idx[m]];
        t.s[m] = s[idx[m]];
        t.invz[m] = 1.0 / -cv.q.z();
        t.bary_over_z[m] = cv.bary * t.invz[m];
      }
      const double area = edge(t.s[0], t.s[1], t.s[2]);
      if (area == 0 || !std::isfinite(area)) continue;
      if (area < 0) {
        std::swap(t.s[1], t.s[2]);
        std::swap(t.invz[1], t.invz[2]);
        std::swap(t.bary_over_z[1], t.bary_over_z[2]);
      }
      const double ylo = std::min({t.s[0].y(), t.s[1].y(), t.s[2].y()});
      const double yhi = std::max({t.s[0].y(), t.s[1].y(), t.s[2].y()});
      t.x_lo = std::min({t.s[0].x(), t.s[1].x(), t.s[2].x()});
      t.x_hi = std::max({t.s[0].x(), t.s[1].x(), t.s[2].x()});
      t.y0 = static_cast<int>(std::max(0.0, std::ceil(ylo - 0.5)));
      t.y1 = static_cast<int>(std::min(static_cast<double>(cam.height - 1), std::floor(yhi - 0.5)));
      if (t.y0 > t.y1 || t.x_hi < 0 || t.x_lo > cam.width) continue;
      out.push_back(t);
    }
  }
  return out;
}

}  // namespace

RasterBuffers rasterize(const TriMesh& scene, const Camera& cam) {
  cam.validate();
  RasterBuffers buf;
  buf.width = cam.width;
  buf.height = cam.height;
  const std::size_t n = static_cast<std::size_t>(cam.width) * static_cast<std::size_t>(cam.height);
  buf.depth.assign(n, DepthMap::kNoHit);
  buf.face.assign(n, -1);
  buf.bary.assign(n, Vec3::Zero());
  const std::vector<ScreenTri> tris = setup(scene, cam);

  parallel_ranges(0, cam.height, [&](int row0, int row1) {
    for (const ScreenTri& t : tris) {
      const int ya = std::max(t.y0, row0), yb = std::min(t.y1, row1 - 1);
      if (ya > yb) continue;
      const int xa = std::max(0, static_cast<int>(std::ceil(t.x_lo - 0.5)));
      const int xb = std::min(cam.width - 1, static_cast<int>(std::floor(t.x_hi - 0.5)));
      const double area = edge(t.s[0], t.s[1], t.s[2]);
      const bool tl0 = top_left(t.s[1], t.s[2]), tl1 = top_left(t.s[2], t.s[0]), tl2 = top_left(t.s[0], t.s[1]);
      for (int y = ya; y <= yb; ++y)
        for (int x = xa; x <= xb; ++x) {
          const Vec2 p(x + 0.5, y + 0.5);
          const double w0 = edge(t.s[1], t.s[2], p), w1 = edge(t.s[2], t.s[0], p), w2 = edge(t.s[0], t.s[1], p);
          if (w0 < 0 || w1 < 0 || w2 < 0) continue;
          if ((w0 == 0 && !tl0) || (w1 == 0 && !tl1) || (w2 == 0 && !tl2)) continue;
          const double l0 = w0 / area, l1 = w1 / area, l2 = w2 / area;
          const double invz = l0 * t.invz[0] + l1 * t.invz[1] + l2 * t.invz[2];
          const double z = 1.0 / invz;
          const std::size_t i = buf.index(x, y);
          if (!(z < buf.depth[i])) continue;
          buf.depth[i] = z;
          buf.face[i] = t.face;
          buf.bary[i] = (t.bary_over_z[0] * l0 + t.bary_over_z[1] * l1 + t.bary_over_z[2] * l2) * z;
        }
    }
  });
  return buf;
}

DepthMap render_depth(const TriMesh& scene, const Camera& cam) {
  RasterBuffers buf = rasterize(scene, cam);
  DepthMap d(cam.width, cam.height);
  d.values = std::move(buf.depth);
  return d;
}

Image8 encode_depth_gray(const DepthMap& depth, const DepthRange& range) {
  if (!(range.near < range.far)) throw Error(ErrorCode::kBadRange, "depth range requires near < far");
  Image8 out(depth.width, depth.height, 1);
  for (std::size_t i = 0; i < depth.values.size(); ++i) {
    const double d = depth.values[i];
    if (!std::isfinite(d)) continue;
    const double g = std::clamp(255.0 * (range.far - d) / (range.far - range.near), 0.0, 255.0);
    out.data[i] = static_cast<std::uint8_t>(std::lround(g));
  }
  return out;
}

std::size_t ConditionImage::count(Provenance p) const {
  return static_cast<std::size_t>(
      std::count(provenance.data.begin(), provenance.data.end(), static_cast<std::uint8_t>(p)));
}

namespace {

bool is_object(const FaceTag& t) { return t.category == Category::kObject || !t.object_id.empty(); }

std::optional<std::array<std::uint8_t, 3>> sample_object(const TriMesh& scene, std::size_t f, const Vec3& bary,
                                                          const ObjectTextures& textures) {
  auto it = textures.find(scene.tag_of(f).object_id);
  if (it == textures.end() || !scene.has_uvs()) return std::nullopt;
  Vec2 uv = Vec2::Zero();
  for (int k = 0; k < 3; ++k) uv += scene.uvs[scene.triangles[f][static_cast<std::size_t>(k)]] * bary[k];
  if (!uv.allFinite()) return std::nullopt;
  const Image8& img = it->second;
  const int x = std::clamp(static_cast<int>(std::floor(uv.x() * img.width)), 0, img.width - 1);
  const int y = std::clamp(static_cast<int>(std::floor((1.0 - uv.y()) * img.height)), 0, img.height - 1);
  std::array<std::uint8_t, 3> c{};
  for (int k = 0; k < 3; ++k) c[static_cast<std::size_t>(k)] = img.at(x, y, std::min(k, img.channels - 1));
  return c;
}

ConditionImage compose(const TriMesh& scene, const Camera& cam, const TextureAtlas& atlas,
                       const ObjectTextures& textures, const DepthRange& range, bool diagnostic) {
  if (!(range.near < range.far)) throw Error(ErrorCode::kBadRange, "depth range requires near < far");
  RasterBuffers buf = rasterize(scene, cam);
  const std::vector<int> chart_of = atlas.assign_faces(scene);
  ConditionImage out{Image8(cam.width, cam.height, 3), Image8(cam.width, cam.height, 1)};
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const std::size_t i = buf.index(x, y);
      const std::int32_t f = buf.face[i];
      if (f < 0) continue;  // background
      const auto fs = static_cast<std::size_t>(f);
      const double d = buf.depth[i];
      const auto gray = static_cast<std::uint8_t>(
          std::lround(std::clamp(255.0 * (range.far - d) / (range.far - range.near), 0.0, 255.0)));
      std::array<double, 3> rgb = {gray, gray, gray};
      Provenance prov = Provenance::kDepthGray;
      bool flat = false;
      if (is_object(scene.tag_of(fs))) {
        auto c = sample_object(scene, fs, buf.bary[i], textures);
        if (c) {
          rgb = {double((*c)[0]), double((*c)[1]), double((*c)[2])};
          prov = Provenance::kObjectTexture;
        } else if (!diagnostic) {
          throw Error(ErrorCode::kMissingObjectTexture,
                      "object '" + scene.tag_of(fs).object_id + "' has no texture or texture coordinates");
        } else {
          rgb = {double(kDiagnosticObject[0]), double(kDiagnosticObject[1]), double(kDiagnosticObject[2])};
          flat = true;
        }
      } else if (chart_of[fs] >= 0) {
        const Chart& ch = atlas.charts[static_cast<std::size_t>(chart_of[fs])];
        Vec3 p = Vec3::Zero();
        for (int k = 0; k < 3; ++k) p += scene.corner(fs, k) * buf.bary[i][k];
        const auto [ti, tj] = ch.texel_of(p);
        const double conf = ch.confidence[ch.index(ti, tj)];
        if (conf > 0) {
          for (int k = 0; k < 3; ++k)
            rgb[static_cast<std::size_t>(k)] = conf * ch.color.at(ti, tj, k) + (1.0 - conf) * gray;
          prov = Provenance::kWallTexture;
        }
      }
      if (diagnostic && prov == Provenance::kDepthGray && !flat)
        rgb = {double(kDiagnosticStructure[0]), double(kDiagnosticStructure[1]), double(kDiagnosticStructure[2])};
      for (int k = 0; k < 3; ++k)
        out.rgb.at(x, y, k) = static_cast<std::uint8_t>(std::lround(std::clamp(rgb[static_cast<std::size_t>(k)], 0.0, 255.0)));
      out.provenance.at(x, y) = static_cast<std::uint8_t>(prov);
    }
  return out;
}

}  // namespace

ConditionImage render_condition(const TriMesh& scene, const Camera& cam, const TextureAtlas& atlas,
                                const ObjectTextures& object_textures, const DepthRange& range) {
  return compose(scene, cam, atlas, object_textures, range, false);
}

Image8 render_color(const TriMesh& scene, const Camera& cam, const TextureAtlas& atlas,
                    const ObjectTextures& object_textures, const DepthRange& range) {
  return compose(scene, cam, atlas, object_textures, range, true).rgb;
}

}  // namespace worldmesh
