#include "worldmesh/texproj.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "worldmesh/parallel.hpp"
#include "worldmesh/structmesh.hpp"

namespace worldmesh {

using ojson = nlohmann::ordered_json;

namespace {

constexpr double kPlaneTol = 1e-6;
constexpr double kNormalTol = 0.999;
constexpr std::array<std::uint8_t, 3> kNeutral = {160, 160, 160};

void init_grid(Chart& c) {
  c.w = std::max(1, static_cast<int>(std::ceil(c.width_m * c.texels_per_meter - 1e-9)));
  c.h = std::max(1, static_cast<int>(std::ceil(c.height_m * c.texels_per_meter - 1e-9)));
  const auto n = static_cast<std::size_t>(c.w) * static_cast<std::size_t>(c.h);
  c.color = Image8(c.w, c.h, 3);
  c.confidence.assign(n, 0.0);
  c.best_cosine.assign(n, 0.0);
  c.mask.assign(n, 0);
}

double edge_fn(const Vec2& a, const Vec2& b, const Vec2& p) { return cross2(b - a, p - a); }

void rasterize_mask(Chart& c, const Vec2& a, const Vec2& b, const Vec2& d) {
  // Texel (i, j) center in parameter space: ((i+.5) du, height - (j+.5) dv).
  const double area = edge_fn(a, b, d);
  if (std::abs(area) < 1e-15) return;
  const double lo_s = std::min({a.x(), b.x(), d.x()}), hi_s = std::max({a.x(), b.x(), d.x()});
  const double lo_t = std::min({a.y(), b.y(), d.y()}), hi_t = std::max({a.y(), b.y(), d.y()});
  const int i0 = std::max(0, static_cast<int>(std::floor(lo_s / c.du() - 0.5)));
  const int i1 = std::min(c.w - 1, static_cast<int>(std::ceil(hi_s / c.du() - 0.5)));
  const int j0 = std::max(0, static_cast<int>(std::floor((c.height_m - hi_t) / c.dv() - 0.5)));
  const int j1 = std::min(c.h - 1, static_cast<int>(std::ceil((c.height_m - lo_t) / c.dv() - 0.5)));
  const double eps = 1e-9 * std::abs(area) + 1e-12;
  for (int j = j0; j <= j1; ++j)
    for (int i = i0; i <= i1; ++i) {
      Vec2 p((i + 0.5) * c.du(), c.height_m - (j + 0.5) * c.dv());
      double w0 = edge_fn(b, d, p), w1 = edge_fn(d, a, p), w2 = edge_fn(a, b, p);
      if (area < 0) {
        w0 = -w0;
        w1 = -w1;
        w2 = -w2;
      }
      if (w0 >= -eps && w1 >= -eps && w2 >= -eps) c.mask[c.index(i, j)] = 1;
    }
}

bool face_matches(const Chart& c, const TriMesh& mesh, std::size_t f) {
  const FaceTag& t = mesh.tag_of(f);
  if (!t.object_id.empty() || t.category != c.category || t.room_id != c.room_id) return false;
  const Vec3 n = mesh.face_normal(f);
  for (int k = 0; k < 3; ++k)
    if (!c.on_plane(mesh.corner(f, k), n)) return false;
  return true;
}

std::string file_stem(const std::string& surface_id) {
  std::string s = surface_id;
  for (char& ch : s)
    if (ch == '/' || ch == '\\' || ch == ' ') ch = '_';
  return s;
}

}  // namespace

Vec3 Chart::texel_center(int i, int j) const {
  return origin + u_axis * ((i + 0.5) * du()) + v_axis * (height_m - (j + 0.5) * dv());
}

std::pair<int, int> Chart::texel_of(const Vec3& p) const {
  Vec2 st = params(p);
  int i = static_cast<int>(std::floor(st.x() / du()));
  int j = static_cast<int>(std::floor((height_m - st.y()) / dv()));
  return {std::clamp(i, 0, w - 1), std::clamp(j, 0, h - 1)};
}

bool Chart::on_plane(const Vec3& p, const Vec3& face_normal) const {
  return face_normal.dot(normal) > kNormalTol && std::abs((p - origin).dot(normal)) < kPlaneTol;
}

std::size_t Chart::coverage() const {
  return static_cast<std::size_t>(std::count_if(confidence.begin(), confidence.end(), [](double c) { return c > 0; }));
}

std::size_t TextureAtlas::coverage() const {
  std::size_t n = 0;
  for (const Chart& c : charts) n += c.coverage();
  return n;
}

std::vector<int> TextureAtlas::assign_faces(const TriMesh& mesh) const {
  std::vector<int> out(mesh.triangle_count(), -1);
  for (std::size_t f = 0; f < mesh.triangle_count(); ++f) {
    const Vec3 centroid = (mesh.corner(f, 0) + mesh.corner(f, 1) + mesh.corner(f, 2)) / 3.0;
    for (std::size_t c = 0; c < charts.size(); ++c) {
      const Chart& ch = charts[c];
      if (!face_matches(ch, mesh, f)) continue;
      Vec2 st = ch.params(centroid);
      if (st.x() < -kPlaneTol || st.x() > ch.width_m + kPlaneTol || st.y() < -kPlaneTol || st.y() > ch.height_m + kPlaneTol)
        continue;
      out[f] = static_cast<int>(c);
      break;
    }
  }
  return out;
}

bool TextureAtlas::operator==(const TextureAtlas& o) const {
  if (charts.size() != o.charts.size()) return false;
  for (std::size_t i = 0; i < charts.size(); ++i) {
    const Chart &a = charts[i], &b = o.charts[i];
    if (a.surface_id != b.surface_id || a.w != b.w || a.h != b.h || !(a.color == b.color) || a.confidence != b.confidence ||
        a.best_cosine != b.best_cosine || a.mask != b.mask)
      return false;
  }
  return true;
}

TextureAtlas build_atlas(const FloorPlan& plan, const TriMesh& mesh, double texels_per_meter) {
  if (!(texels_per_meter > 0)) throw Error(ErrorCode::kInvalidArgument, "texel density must be positive");
  TextureAtlas atlas;
  const auto runs = wall_runs(plan);
  for (std::size_t r = 0; r < plan.rooms.size(); ++r) {
    const Room& room = plan.rooms[r];
    int k = 0;
    for (const WallRun& run : runs) {
      if (run.room != static_cast<int>(r)) continue;
      Chart c;
      c.surface_id = room.id + "/wall/" + std::to_string(k++);
      c.room_id = room.id;
      c.category = Category::kWall;
      c.origin = Vec3(run.inner_start.x(), run.inner_start.y(), 0.0);
      Vec2 d = run.inner_end - run.inner_start;
      c.width_m = d.norm();
      d /= c.width_m;
      c.u_axis = Vec3(d.x(), d.y(), 0.0);
      c.v_axis = Vec3::UnitZ();
      c.normal = Vec3(run.inward.x(), run.inward.y(), 0.0);
      c.height_m = room.ceiling_height;
      c.texels_per_meter = texels_per_meter;
      atlas.charts.push_back(std::move(c));
    }
    Vec2 lo = room.floor[0], hi = room.floor[0];
    for (const Vec2& v : room.floor.vertices()) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
    for (Category cat : {Category::kFloor, Category::kCeiling}) {
      Chart c;
      c.surface_id = room.id + "/" + std::string(to_string(cat));
      c.room_id = room.id;
      c.category = cat;
      c.origin = Vec3(lo.x(), lo.y(), cat == Category::kFloor ? 0.0 : room.ceiling_height);
      c.u_axis = Vec3::UnitX();
      c.v_axis = Vec3::UnitY();
      c.normal = cat == Category::kFloor ? Vec3::UnitZ() : Vec3(-Vec3::UnitZ());
      c.width_m = hi.x() - lo.x();
      c.height_m = hi.y() - lo.y();
      c.texels_per_meter = texels_per_meter;
      atlas.charts.push_back(std::move(c));
    }
  }
  for (Chart& c : atlas.charts) {
    init_grid(c);
    for (std::size_t f = 0; f < mesh.triangle_count(); ++f)
      if (face_matches(c, mesh, f)) rasterize_mask(c, c.params(mesh.corner(f, 0)), c.params(mesh.corner(f, 1)), c.params(mesh.corner(f, 2)));
    if (c.category == Category::kWall) continue;
    // Floor and ceiling texels outside the inner outline lie under walls.
    const Polygon2D outline = inner_outline(runs, plan.room_index(c.room_id));
    if (outline.size() < 3) continue;
    for (int j = 0; j < c.h; ++j)
      for (int i = 0; i < c.w; ++i) {
        const Vec3 q = c.texel_center(i, j);
        if (!outline.contains(Vec2(q.x(), q.y()))) c.mask[c.index(i, j)] = 0;
      }
  }
  return atlas;
}

std::optional<Vec2> vertex_uv(const Vec3& world, const Camera& cam) {
  Vec3 q = cam.to_camera(world);
  if (-q.z() <= 0) throw Error(ErrorCode::kBehindCamera, "point is not in front of the camera");
  Vec2 p = cam.project_camera(q);
  if (p.x() < 0 || p.x() > cam.width || p.y() < 0 || p.y() > cam.height) return std::nullopt;
  return Vec2(p.x() / cam.width, 1.0 - p.y() / cam.height);
}

std::size_t project_image(const TriMesh&, const Camera& cam, const Image8& image, const DepthMap& depth,
                          const std::string& room_id, TextureAtlas& atlas, const ProjectOptions& opts) {
  if (image.width != cam.width || image.height != cam.height || image.channels != 3)
    throw Error(ErrorCode::kDimensionMismatch, "image does not match the camera");
  if (depth.width != cam.width || depth.height != cam.height)
    throw Error(ErrorCode::kDimensionMismatch, "depth map does not match the camera");
  std::size_t written = 0;
  for (Chart& c : atlas.charts) {
    if (c.room_id != room_id) continue;  // room filter
    std::vector<std::size_t> per_row(static_cast<std::size_t>(c.h), 0);
    parallel_ranges(0, c.h, [&](int j0, int j1) {
      for (int j = j0; j < j1; ++j)
        for (int i = 0; i < c.w; ++i) {
          const std::size_t t = c.index(i, j);
          if (!c.mask[t]) continue;
          const Vec3 p = c.texel_center(i, j);
          const Vec3 to_cam = cam.position - p;
          const double cosine = c.normal.dot(to_cam) / to_cam.norm();
          if (!(cosine > 0)) continue;  // back-face
          const Vec3 q = cam.to_camera(p);
          const double z = -q.z();
          if (z <= 1e-9) continue;
          const Vec2 px = cam.project_camera(q);
          if (!(px.x() >= 0 && px.x() < cam.width && px.y() >= 0 && px.y() < cam.height)) continue;  // in-image
          const int xi = static_cast<int>(px.x()), yi = static_cast<int>(px.y());
          const double d = depth.at(xi, yi);
          if (!std::isfinite(d) || std::abs(z - d) > opts.tau) continue;  // occlusion
          if (cosine <= c.best_cosine[t]) continue;
          for (int ch = 0; ch < 3; ++ch) c.color.at(i, j, ch) = image.at(xi, yi, ch);
          c.best_cosine[t] = cosine;
          c.confidence[t] = cosine;
          ++per_row[static_cast<std::size_t>(j)];
        }
    });
    for (std::size_t n : per_row) written += n;
  }
  return written;
}

void accumulate_views(const TriMesh& scene, const std::vector<View>& views, TextureAtlas& atlas,
                      const ProjectOptions& opts) {
  for (const View& v : views) project_image(scene, v.cam, v.image, v.depth, v.cam.room_id, atlas, opts);
}

void save_atlas(const TextureAtlas& atlas, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  ojson manifest = ojson::array();
  for (const Chart& c : atlas.charts) {
    const std::string stem = file_stem(c.surface_id);
    write_png(dir / (stem + ".png"), c.color);
    Image8 conf(c.w, c.h, 1), mask(c.w, c.h, 1);
    std::vector<std::uint8_t> raw;
    raw.reserve(c.confidence.size() * 16);
    for (std::size_t t = 0; t < c.confidence.size(); ++t) {
      conf.data[t] = static_cast<std::uint8_t>(std::lround(std::clamp(c.confidence[t], 0.0, 1.0) * 255.0));
      mask.data[t] = c.mask[t] ? 255 : 0;
      for (double v : {c.confidence[t], c.best_cosine[t]}) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        for (int k = 0; k < 8; ++k) raw.push_back(static_cast<std::uint8_t>((bits >> (8 * k)) & 0xff));
      }
    }
    write_png(dir / (stem + ".conf.png"), conf);
    write_png(dir / (stem + ".mask.png"), mask);
    write_file(dir / (stem + ".conf.bin"), raw);
    ojson j;
    j["surface_id"] = c.surface_id;
    j["room"] = c.room_id;
    j["category"] = to_string(c.category);
    j["origin"] = {c.origin.x(), c.origin.y(), c.origin.z()};
    j["u_axis"] = {c.u_axis.x(), c.u_axis.y(), c.u_axis.z()};
    j["v_axis"] = {c.v_axis.x(), c.v_axis.y(), c.v_axis.z()};
    j["normal"] = {c.normal.x(), c.normal.y(), c.normal.z()};
    j["texels_per_meter"] = c.texels_per_meter;
    j["width_m"] = c.width_m;
    j["height_m"] = c.height_m;
    j["texels"] = {c.w, c.h};
    j["image"] = stem + ".png";
    j["confidence_image"] = stem + ".conf.png";
    j["mask_image"] = stem + ".mask.png";
    j["confidence_data"] = stem + ".conf.bin";
    manifest.push_back(std::move(j));
  }
  write_text(dir / "charts.json", manifest.dump(2) + "\n");
}

TextureAtlas load_atlas(const std::filesystem::path& dir) {
  TextureAtlas atlas;
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text(dir / "charts.json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIoError, std::string("bad chart manifest: ") + e.what());
  }
  auto vec3 = [](const nlohmann::json& a) { return Vec3(a.at(0), a.at(1), a.at(2)); };
  for (const auto& j : manifest) {
    Chart c;
    c.surface_id = j.at("surface_id");
    c.room_id = j.at("room");
    c.category = category_from_string(j.at("category").get<std::string>());
    c.origin = vec3(j.at("origin"));
    c.u_axis = vec3(j.at("u_axis"));
    c.v_axis = vec3(j.at("v_axis"));
    c.normal = vec3(j.at("normal"));
    c.texels_per_meter = j.at("texels_per_meter");
    c.width_m = j.at("width_m");
    c.height_m = j.at("height_m");
    init_grid(c);
    if (c.w != j.at("texels").at(0).get<int>() || c.h != j.at("texels").at(1).get<int>())
      throw Error(ErrorCode::kIoError, "chart " + c.surface_id + " has inconsistent texel counts");
    c.color = read_png(dir / j.at("image").get<std::string>());
    Image8 mask = read_png(dir / j.at("mask_image").get<std::string>());
    auto raw = read_file(dir / j.at("confidence_data").get<std::string>());
    if (raw.size() != c.confidence.size() * 16 || !(c.color.width == c.w && c.color.height == c.h) || mask.data.size() != c.mask.size())
      throw Error(ErrorCode::kIoError, "chart " + c.surface_id + " data does not match its size");
    for (std::size_t t = 0; t < c.confidence.size(); ++t) {
      std::uint64_t a = 0, b = 0;
      for (int k = 0; k < 8; ++k) {
        a |= static_cast<std::uint64_t>(raw[16 * t + static_cast<std::size_t>(k)]) << (8 * k);
        b |= static_cast<std::uint64_t>(raw[16 * t + 8 + static_cast<std::size_t>(k)]) << (8 * k);
      }
      c.confidence[t] = std::bit_cast<double>(a);
      c.best_cosine[t] = std::bit_cast<double>(b);
      c.mask[t] = mask.data[t] ? 1 : 0;
    }
    atlas.charts.push_back(std::move(c));
  }
  return atlas;
}

BakedMesh bake_atlas(const TriMesh& mesh, const TextureAtlas& atlas, const std::map<std::string, Image8>& object_textures) {
  BakedMesh out;
  const std::vector<int> chart_of = atlas.assign_faces(mesh);

  struct Packing {
    Image8 image;
    std::map<int, int> y_offset;  // chart -> first row
  };
  std::map<FaceTag, Packing> packs;
  for (std::size_t c = 0; c < atlas.charts.size(); ++c) {
    const Chart& ch = atlas.charts[c];
    FaceTag tag{ch.room_id, ch.category, {}};
    packs[tag].y_offset[static_cast<int>(c)] = 0;
  }
  for (auto& [tag, pack] : packs) {
    int w = 1, h = 0;
    for (auto& [c, off] : pack.y_offset) {
      off = h;
      w = std::max(w, atlas.charts[static_cast<std::size_t>(c)].w);
      h += atlas.charts[static_cast<std::size_t>(c)].h;
    }
    pack.image = Image8(w, h + 1, 3);
    for (int i = 0; i < w; ++i)
      for (int k = 0; k < 3; ++k) pack.image.at(i, h, k) = kNeutral[static_cast<std::size_t>(k)];
    for (const auto& [c, off] : pack.y_offset) {
      const Chart& ch = atlas.charts[static_cast<std::size_t>(c)];
      for (int j = 0; j < ch.h; ++j)
        for (int i = 0; i < ch.w; ++i) {
          const bool lit = ch.confidence[ch.index(i, j)] > 0;
          for (int k = 0; k < 3; ++k)
            pack.image.at(i, off + j, k) = lit ? ch.color.at(i, j, k) : kNeutral[static_cast<std::size_t>(k)];
        }
      for (int j = 0; j < ch.h; ++j)
        for (int i = ch.w; i < w; ++i)
          for (int k = 0; k < 3; ++k) pack.image.at(i, off + j, k) = kNeutral[static_cast<std::size_t>(k)];
    }
  }

  TriMesh& m = out.mesh;
  m.uvs.clear();
  const Vec2 nan_uv(std::nan(""), std::nan(""));
  for (std::size_t f = 0; f < mesh.triangle_count(); ++f) {
    const FaceTag& tag = mesh.tag_of(f);
    const std::uint32_t t = m.intern_tag(tag);
    std::array<std::uint32_t, 3> idx{};
    auto pit = packs.find(tag);
    for (int k = 0; k < 3; ++k) {
      const Vec3 p = mesh.corner(f, k);
      idx[static_cast<std::size_t>(k)] = m.add_vertex(p);
      Vec2 uv = nan_uv;
      if (pit != packs.end()) {
        const Image8& img = pit->second.image;
        const int c = chart_of[f];
        if (c >= 0) {
          const Chart& ch = atlas.charts[static_cast<std::size_t>(c)];
          Vec2 st = ch.params(p);
          double x = st.x() / ch.du();
          double y = pit->second.y_offset.at(c) + (ch.height_m - st.y()) / ch.dv();
          uv = Vec2(x / img.width, 1.0 - y / img.height);
        } else {
          uv = Vec2(0.5 / img.width, 0.5 / img.height);
        }
      } else if (!tag.object_id.empty() && object_textures.count(tag.object_id) && mesh.has_uvs()) {
        uv = mesh.uvs[mesh.triangles[f][static_cast<std::size_t>(k)]];
      }
      m.uvs.push_back(uv);
    }
    m.add_triangle(idx[0], idx[1], idx[2], t);
  }
  for (auto& [tag, pack] : packs) out.textures.emplace(tag, std::move(pack.image));
  for (const FaceTag& tag : m.tags)
    if (!tag.object_id.empty())
      if (auto it = object_textures.find(tag.object_id); it != object_textures.end()) out.textures.emplace(tag, it->second);
  return out;
}

}  // namespace worldmesh
