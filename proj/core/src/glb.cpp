#include "worldmesh/glb.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>

#include <json.hpp>

#include "worldmesh/error.hpp"

namespace worldmesh {

using ojson = nlohmann::ordered_json;
using json = nlohmann::json;

namespace {

constexpr std::uint32_t kMagic = 0x46546C67;  // "glTF"
constexpr std::uint32_t kChunkJson = 0x4E4F534A;
constexpr std::uint32_t kChunkBin = 0x004E4942;
constexpr int kFloat = 5126, kUInt = 5125, kUShort = 5123, kUByte = 5121;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>((v >> (8 * k)) & 0xff));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  if (at + 4 > b.size()) throw Error(ErrorCode::kIoError, "truncated GLB");
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

void put_f32(std::vector<std::uint8_t>& out, double v) { put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v))); }

void pad4(std::vector<std::uint8_t>& out, std::uint8_t fill) {
  while (out.size() % 4) out.push_back(fill);
}

Vec3 to_file(const Vec3& p) { return {p.x(), p.z(), -p.y()}; }
Vec3 from_file(const Vec3& p) { return {p.x(), -p.z(), p.y()}; }

std::array<double, 4> diagnostic_color(Category c) {
  switch (c) {
    case Category::kWall: return {0.80, 0.78, 0.74, 1.0};
    case Category::kFloor: return {0.55, 0.45, 0.35, 1.0};
    case Category::kCeiling: return {0.95, 0.95, 0.95, 1.0};
    case Category::kObject: return {0.40, 0.55, 0.75, 1.0};
  }
  return {1, 1, 1, 1};
}

ojson tag_json(const FaceTag& t) {
  ojson j;
  j["room_id"] = t.room_id;
  j["category"] = to_string(t.category);
  j["object_id"] = t.object_id;
  return j;
}

// Face indices per tag id in order of first appearance.
std::vector<std::pair<std::uint32_t, std::vector<std::size_t>>> group_faces(const TriMesh& mesh) {
  std::vector<std::pair<std::uint32_t, std::vector<std::size_t>>> groups;
  std::map<std::uint32_t, std::size_t> slot;
  for (std::size_t f = 0; f < mesh.triangle_count(); ++f) {
    auto [it, inserted] = slot.emplace(mesh.face_tag[f], groups.size());
    if (inserted) groups.push_back({mesh.face_tag[f], {}});
    groups[it->second].second.push_back(f);
  }
  return groups;
}

}  // namespace

std::string glb_tag_manifest(const TriMesh& mesh) {
  ojson j = ojson::array();
  std::size_t index = 0;
  for (const auto& [tag, faces] : group_faces(mesh)) {
    ojson e = tag_json(mesh.tags[tag]);
    e["primitive"] = index++;
    e["triangles"] = faces.size();
    j.push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

std::vector<std::uint8_t> encode_glb(const TriMesh& mesh, const TextureMap& textures) {
  if (mesh.empty()) throw Error(ErrorCode::kEmptyMesh, "cannot export an empty mesh");
  std::vector<std::uint8_t> bin;
  ojson doc;
  doc["asset"] = {{"version", "2.0"}, {"generator", "worldmesh"}};
  doc["scene"] = 0;
  doc["scenes"] = ojson::array({ojson{{"nodes", ojson::array({0})}}});
  doc["nodes"] = ojson::array({ojson{{"mesh", 0}, {"name", "scene"}}});
  ojson views = ojson::array(), accessors = ojson::array(), materials = ojson::array(), prims = ojson::array();
  ojson images = ojson::array(), gl_textures = ojson::array();

  auto add_view = [&](std::size_t offset, std::size_t length, std::optional<int> target) {
    ojson v{{"buffer", 0}, {"byteOffset", offset}, {"byteLength", length}};
    if (target) v["target"] = *target;
    views.push_back(std::move(v));
    return views.size() - 1;
  };

  for (const auto& [tag_id, faces] : group_faces(mesh)) {
    const FaceTag& tag = mesh.tags[tag_id];
    auto tex = textures.find(tag);
    const bool textured = tex != textures.end();
    std::map<std::uint32_t, std::uint32_t> remap;
    std::vector<std::uint32_t> order;
    std::vector<std::uint32_t> indices;
    for (std::size_t f : faces)
      for (int k = 0; k < 3; ++k) {
        std::uint32_t v = mesh.triangles[f][static_cast<std::size_t>(k)];
        auto [it, inserted] = remap.emplace(v, static_cast<std::uint32_t>(order.size()));
        if (inserted) order.push_back(v);
        indices.push_back(it->second);
      }

    ojson attrs;
    // Positions.
    pad4(bin, 0);
    std::size_t off = bin.size();
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
    for (std::uint32_t v : order) {
      Vec3 p = to_file(mesh.vertices[v]).cast<float>().cast<double>();
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
      for (int k = 0; k < 3; ++k) put_f32(bin, p[k]);
    }
    accessors.push_back({{"bufferView", add_view(off, bin.size() - off, 34962)},
                         {"componentType", kFloat},
                         {"count", order.size()},
                         {"type", "VEC3"},
                         {"min", {lo.x(), lo.y(), lo.z()}},
                         {"max", {hi.x(), hi.y(), hi.z()}}});
    attrs["POSITION"] = accessors.size() - 1;

    if (textured) {
      off = bin.size();
      for (std::uint32_t v : order) {
        Vec2 uv = mesh.has_uvs() ? mesh.uvs[v] : Vec2(0, 0);
        if (!std::isfinite(uv.x()) || !std::isfinite(uv.y())) uv = Vec2(0, 0);
        put_f32(bin, uv.x());
        put_f32(bin, 1.0 - uv.y());
      }
      accessors.push_back({{"bufferView", add_view(off, bin.size() - off, 34962)},
                           {"componentType", kFloat},
                           {"count", order.size()},
                           {"type", "VEC2"}});
      attrs["TEXCOORD_0"] = accessors.size() - 1;
    }

    off = bin.size();
    for (std::uint32_t i : indices) put_u32(bin, i);
    accessors.push_back({{"bufferView", add_view(off, bin.size() - off, 34963)},
                         {"componentType", kUInt},
                         {"count", indices.size()},
                         {"type", "SCALAR"}});
    const std::size_t index_accessor = accessors.size() - 1;

    ojson mat;
    mat["name"] = tag.room_id + "/" + std::string(to_string(tag.category)) +
                  (tag.object_id.empty() ? "" : "/" + tag.object_id);
    if (textured) {
      auto png = encode_png(tex->second);
      off = bin.size();
      bin.insert(bin.end(), png.begin(), png.end());
      images.push_back({{"bufferView", add_view(off, png.size(), std::nullopt)}, {"mimeType", "image/png"}});
      gl_textures.push_back({{"source", images.size() - 1}});
      mat["pbrMetallicRoughness"] = {{"baseColorTexture", {{"index", gl_textures.size() - 1}}},
                                     {"metallicFactor", 0.0}, {"roughnessFactor", 1.0}};
    } else {
      auto c = diagnostic_color(tag.category);
      mat["pbrMetallicRoughness"] = {{"baseColorFactor", {c[0], c[1], c[2], c[3]}}, {"metallicFactor", 0.0},
                                     {"roughnessFactor", 1.0}};
    }
    mat["doubleSided"] = false;
    materials.push_back(std::move(mat));
    prims.push_back({{"attributes", attrs},
                     {"indices", index_accessor},
                     {"material", materials.size() - 1},
                     {"mode", 4},
                     {"extras", tag_json(tag)}});
  }
  pad4(bin, 0);

  doc["meshes"] = ojson::array({ojson{{"name", "scaffold"}, {"primitives", prims}}});
  doc["materials"] = materials;
  if (!images.empty()) {
    doc["images"] = images;
    doc["textures"] = gl_textures;
    doc["samplers"] = ojson::array({ojson{{"magFilter", 9729}, {"minFilter", 9729}}});
    for (auto& t : doc["textures"]) t["sampler"] = 0;
  }
  doc["accessors"] = accessors;
  doc["bufferViews"] = views;
  doc["buffers"] = ojson::array({ojson{{"byteLength", bin.size()}}});

  std::string js = doc.dump();
  while (js.size() % 4) js.push_back(' ');
  std::vector<std::uint8_t> out;
  put_u32(out, kMagic);
  put_u32(out, 2);
  put_u32(out, static_cast<std::uint32_t>(12 + 8 + js.size() + 8 + bin.size()));
  put_u32(out, static_cast<std::uint32_t>(js.size()));
  put_u32(out, kChunkJson);
  out.insert(out.end(), js.begin(), js.end());
  put_u32(out, static_cast<std::uint32_t>(bin.size()));
  put_u32(out, kChunkBin);
  out.insert(out.end(), bin.begin(), bin.end());
  return out;
}

void export_glb(const TriMesh& mesh, const std::filesystem::path& path, const TextureMap& textures) {
  write_file(path, encode_glb(mesh, textures));
  auto sidecar = path;
  sidecar.replace_extension(".tags.json");
  write_text(sidecar, glb_tag_manifest(mesh));
}

namespace {

struct Reader {
  json doc;
  std::span<const std::uint8_t> bin;

  std::span<const std::uint8_t> view_bytes(std::size_t view, std::size_t extra_offset, std::size_t& stride) const {
    const json& v = doc.at("bufferViews").at(view);
    if (v.value("buffer", 0) != 0) throw Error(ErrorCode::kIoError, "only the embedded GLB buffer is supported");
    std::size_t off = v.value("byteOffset", std::size_t{0}) + extra_offset;
    std::size_t len = v.at("byteLength").get<std::size_t>();
    stride = v.value("byteStride", std::size_t{0});
    if (v.value("byteOffset", std::size_t{0}) + len > bin.size()) throw Error(ErrorCode::kIoError, "bufferView out of range");
    return bin.subspan(off, len - extra_offset);
  }

  // Reads accessor `index` as doubles, `comps` per element.
  std::vector<double> accessor(std::size_t index, int& comps, std::size_t& count) const {
    const json& a = doc.at("accessors").at(index);
    const std::string type = a.at("type");
    comps = type == "SCALAR" ? 1 : type == "VEC2" ? 2 : type == "VEC3" ? 3 : type == "VEC4" ? 4 : 0;
    if (comps == 0) throw Error(ErrorCode::kIoError, "unsupported accessor type " + type);
    const int ct = a.at("componentType");
    const std::size_t csize = ct == kFloat || ct == kUInt ? 4 : ct == kUShort ? 2 : ct == kUByte ? 1 : 0;
    if (csize == 0) throw Error(ErrorCode::kIoError, "unsupported component type");
    count = a.at("count");
    std::vector<double> out(count * static_cast<std::size_t>(comps), 0.0);
    if (!a.contains("bufferView")) return out;
    std::size_t stride = 0;
    auto bytes = view_bytes(a.at("bufferView"), a.value("byteOffset", std::size_t{0}), stride);
    const std::size_t elem = csize * static_cast<std::size_t>(comps);
    if (stride == 0) stride = elem;
    if (count > 0 && (count - 1) * stride + elem > bytes.size()) throw Error(ErrorCode::kIoError, "accessor out of range");
    for (std::size_t i = 0; i < count; ++i)
      for (int c = 0; c < comps; ++c) {
        std::size_t at = i * stride + static_cast<std::size_t>(c) * csize;
        double v = 0;
        if (ct == kFloat) v = std::bit_cast<float>(get_u32(bytes, at));
        else if (ct == kUInt) v = get_u32(bytes, at);
        else if (ct == kUShort) v = static_cast<std::uint16_t>(bytes[at] | (bytes[at + 1] << 8));
        else v = bytes[at];
        out[i * static_cast<std::size_t>(comps) + static_cast<std::size_t>(c)] = v;
      }
    return out;
  }

  std::optional<Image8> material_texture(const json& prim) const {
    if (!prim.contains("material")) return std::nullopt;
    const json& m = doc.at("materials").at(prim.at("material").get<std::size_t>());
    if (!m.contains("pbrMetallicRoughness") || !m["pbrMetallicRoughness"].contains("baseColorTexture")) return std::nullopt;
    std::size_t t = m["pbrMetallicRoughness"]["baseColorTexture"].at("index");
    const json& tex = doc.at("textures").at(t);
    if (!tex.contains("source")) return std::nullopt;
    const json& img = doc.at("images").at(tex.at("source").get<std::size_t>());
    if (!img.contains("bufferView")) throw Error(ErrorCode::kIoError, "external image URIs are not supported");
    std::size_t stride = 0;
    return decode_png(view_bytes(img.at("bufferView"), 0, stride));
  }
};

Eigen::Matrix4d node_matrix(const json& node) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  if (node.contains("matrix")) {
    for (int c = 0; c < 4; ++c)
      for (int r = 0; r < 4; ++r) m(r, c) = node["matrix"][static_cast<std::size_t>(c * 4 + r)].get<double>();
    return m;
  }
  Eigen::Affine3d a = Eigen::Affine3d::Identity();
  if (node.contains("translation"))
    a.translate(Vec3(node["translation"][0].get<double>(), node["translation"][1].get<double>(), node["translation"][2].get<double>()));
  if (node.contains("rotation"))
    a.rotate(Quat(node["rotation"][3].get<double>(), node["rotation"][0].get<double>(), node["rotation"][1].get<double>(),
                  node["rotation"][2].get<double>()).normalized());
  if (node.contains("scale"))
    a.scale(Vec3(node["scale"][0].get<double>(), node["scale"][1].get<double>(), node["scale"][2].get<double>()));
  return a.matrix();
}

}  // namespace

std::vector<GlbPrimitive> decode_glb(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 20 || get_u32(bytes, 0) != kMagic) throw Error(ErrorCode::kIoError, "not a GLB file");
  if (get_u32(bytes, 4) != 2) throw Error(ErrorCode::kIoError, "unsupported GLB version");
  std::size_t pos = 12;
  Reader rd;
  bool have_json = false;
  while (pos + 8 <= bytes.size()) {
    std::uint32_t len = get_u32(bytes, pos), type = get_u32(bytes, pos + 4);
    pos += 8;
    if (pos + len > bytes.size()) throw Error(ErrorCode::kIoError, "truncated GLB chunk");
    if (type == kChunkJson) {
      try {
        rd.doc = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.begin() + static_cast<std::ptrdiff_t>(pos + len));
      } catch (const json::exception& e) {
        throw Error(ErrorCode::kIoError, std::string("bad GLB JSON: ") + e.what());
      }
      have_json = true;
    } else if (type == kChunkBin) {
      rd.bin = bytes.subspan(pos, len);
    }
    pos += len;
  }
  if (!have_json) throw Error(ErrorCode::kIoError, "GLB has no JSON chunk");

  std::vector<GlbPrimitive> out;
  try {
    std::vector<std::size_t> roots;
    if (rd.doc.contains("scenes") && !rd.doc["scenes"].empty()) {
      std::size_t s = rd.doc.value("scene", std::size_t{0});
      for (const auto& n : rd.doc["scenes"].at(s).value("nodes", json::array())) roots.push_back(n.get<std::size_t>());
    } else if (rd.doc.contains("nodes")) {
      for (std::size_t i = 0; i < rd.doc["nodes"].size(); ++i) roots.push_back(i);
    }
    std::vector<std::pair<std::size_t, Eigen::Matrix4d>> stack;
    for (auto it = roots.rbegin(); it != roots.rend(); ++it) stack.push_back({*it, Eigen::Matrix4d::Identity()});
    while (!stack.empty()) {
      auto [ni, parent] = stack.back();
      stack.pop_back();
      const json& node = rd.doc.at("nodes").at(ni);
      Eigen::Matrix4d world = parent * node_matrix(node);
      if (node.contains("mesh")) {
        const json& gm = rd.doc.at("meshes").at(node["mesh"].get<std::size_t>());
        for (const json& prim : gm.at("primitives")) {
          if (prim.value("mode", 4) != 4) continue;
          GlbPrimitive gp;
          if (prim.contains("extras") && prim["extras"].is_object()) {
            const json& ex = prim["extras"];
            gp.tag.room_id = ex.value("room_id", "");
            gp.tag.category = category_from_string(ex.value("category", "object"));
            gp.tag.object_id = ex.value("object_id", "");
          } else {
            gp.tag.category = Category::kObject;
          }
          int comps = 0;
          std::size_t count = 0;
          auto pos_data = rd.accessor(prim.at("attributes").at("POSITION"), comps, count);
          if (comps != 3) throw Error(ErrorCode::kIoError, "POSITION must be VEC3");
          const std::uint32_t tag = gp.mesh.intern_tag(gp.tag);
          for (std::size_t i = 0; i < count; ++i) {
            Eigen::Vector4d p(pos_data[3 * i], pos_data[3 * i + 1], pos_data[3 * i + 2], 1.0);
            gp.mesh.add_vertex(from_file((world * p).head<3>()));
          }
          if (prim["attributes"].contains("TEXCOORD_0")) {
            std::size_t uc = 0;
            auto uv = rd.accessor(prim["attributes"]["TEXCOORD_0"], comps, uc);
            if (comps != 2 || uc != count) throw Error(ErrorCode::kIoError, "TEXCOORD_0 mismatch");
            for (std::size_t i = 0; i < uc; ++i) gp.mesh.uvs.emplace_back(uv[2 * i], 1.0 - uv[2 * i + 1]);
            gp.texture = rd.material_texture(prim);
          }
          std::vector<std::uint32_t> idx;
          if (prim.contains("indices")) {
            std::size_t ic = 0;
            auto id = rd.accessor(prim["indices"], comps, ic);
            for (double d : id) idx.push_back(static_cast<std::uint32_t>(d));
          } else {
            for (std::size_t i = 0; i < count; ++i) idx.push_back(static_cast<std::uint32_t>(i));
          }
          const bool flip = world.topLeftCorner<3, 3>().determinant() < 0;
          for (std::size_t i = 0; i + 2 < idx.size(); i += 3) {
            if (idx[i] >= count || idx[i + 1] >= count || idx[i + 2] >= count)
              throw Error(ErrorCode::kIoError, "index out of range");
            if (flip) gp.mesh.add_triangle(idx[i], idx[i + 2], idx[i + 1], tag);
            else gp.mesh.add_triangle(idx[i], idx[i + 1], idx[i + 2], tag);
          }
          out.push_back(std::move(gp));
        }
      }
      const json children = node.value("children", json::array());
      for (auto it = children.rbegin(); it != children.rend(); ++it) stack.push_back({it->get<std::size_t>(), world});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIoError, std::string("malformed glTF: ") + e.what());
  }
  return out;
}

std::vector<GlbPrimitive> import_glb(const std::filesystem::path& path) { return decode_glb(read_file(path)); }

TriMesh merge_primitives(const std::vector<GlbPrimitive>& prims) {
  TriMesh m;
  for (const auto& p : prims) m.append(p.mesh);
  return m;
}

}  // namespace worldmesh
