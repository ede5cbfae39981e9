#include "worldmesh/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "worldmesh/glb.hpp"
#include "worldmesh/hash.hpp"
#include "worldmesh/meshio.hpp"
#include "worldmesh/resources.hpp"
#include "worldmesh/transport.hpp"

namespace worldmesh {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

template <class T>
void read_opt(const ojson& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::string env_or(const std::string& source, const char* var) {
  if (!source.empty()) return source;
  if (const char* v = std::getenv(var); v && *v) return v;
  throw Error(ErrorCode::kInvalidArgument, std::string("no endpoint configured and ") + var + " is unset");
}

std::uint64_t hash64(std::string_view text) {
  return std::stoull(sha256_hex(text).substr(0, 16), nullptr, 16);
}

std::uint64_t view_seed(std::uint64_t seed, const std::string& view_id, int attempt) {
  return mix_seed(mix_seed(seed, hash64(view_id)), static_cast<std::uint64_t>(attempt));
}

void check(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kInvalidArgument, "config: " + what);
}

bool one_of(const std::string& v, std::initializer_list<const char*> options) {
  return std::any_of(options.begin(), options.end(), [&](const char* o) { return v == o; });
}

void put_text(const fs::path& path, std::string_view text) {
  fs::create_directories(path.parent_path());
  write_text(path, text);
}

void put_png(const fs::path& path, const Image8& img) {
  fs::create_directories(path.parent_path());
  write_png(path, img);
}

}  // namespace

// ---- config ------------------------------------------------------------------

void RunConfig::validate() const {
  check(!theme.empty(), "theme must not be empty");
  check(one_of(layout.kind, {"file", "directory", "command", "http"}), "unknown layout provider '" + layout.kind + "'");
  check(layout.max_attempts >= 1, "layout.max_attempts must be >= 1");
  check(one_of(image.kind, {"mock", "dir", "command", "http"}), "unknown image adapter '" + image.kind + "'");
  check(image.timeout_seconds >= 0, "image.timeout_seconds must be >= 0");
  check(one_of(depth.kind, {"echo", "constant", "stored", "command", "http"}), "unknown depth adapter '" + depth.kind + "'");
  check(std::isfinite(depth.constant) && depth.constant > 0, "depth.constant must be > 0");
  check(one_of(objects.kind, {"none", "mock", "dir", "command"}), "unknown object source '" + objects.kind + "'");
  if (layout.kind == "file" || layout.kind == "directory") check(!layout.source.empty(), "layout.source is required");
  if (image.kind == "dir") check(!image.source.empty(), "image.source is required");
  if (depth.kind == "stored") check(!depth.source.empty(), "depth.source is required");
  if (objects.kind == "dir") check(!objects.source.empty(), "objects.source is required");

  const auto& c = cameras;
  check(c.width >= 16 && c.height >= 16, "camera image size must be at least 16x16");
  check(c.hfov_deg > 0 && c.hfov_deg < 180, "cameras.hfov_deg must be in (0, 180)");
  check(c.object_hfov_deg > 0 && c.object_hfov_deg < 180, "cameras.object_hfov_deg must be in (0, 180)");
  check(c.eye_height > 0, "cameras.eye_height must be > 0");
  check(c.wall_offset >= 0, "cameras.wall_offset must be >= 0");
  check(c.perimeter_count >= 0 && c.overhead_count >= 0, "camera counts must be >= 0");
  check(c.overhead_height_fraction > 0 && c.overhead_height_fraction < 1, "cameras.overhead_height_fraction must be in (0, 1)");
  check(c.overhead_pitch_deg >= 0 && c.overhead_pitch_deg < 90, "cameras.overhead_pitch_deg must be in [0, 90)");
  check(c.min_spacing > 0, "cameras.min_spacing must be > 0");
  check(c.clearance >= 0, "cameras.clearance must be >= 0");
  check(structure.slab_thickness > 0, "structure.slab_thickness must be > 0");
  check(texels_per_meter > 0, "texture.texels_per_meter must be > 0");
  check(projection.tau > 0, "texture.tau must be > 0");
  check(depth_range.near > 0 && depth_range.far > depth_range.near, "render range needs 0 < near < far");
  check(verify.canny.low > 0 && verify.canny.high >= verify.canny.low, "verify needs 0 < canny_low <= canny_high");
  check(verify.delta >= 0, "verify.delta must be >= 0");
  check(verify.threshold >= 0 && verify.threshold <= 1, "verify.threshold must be in [0, 1]");
  check(max_retries >= 1, "verify.max_retries must be >= 1");
  check(stride >= 1, "recon.stride must be >= 1");
  check(voxel > 0, "recon.voxel must be > 0");
  check(loss.lambda_s >= 0 && loss.lambda_s <= 1 && loss.lambda_d >= 0, "loss weights out of range");
}

std::string RunConfig::to_json() const {
  const auto& c = cameras;
  ojson j;
  j["theme"] = theme;
  j["seed"] = seed;
  j["layout"] = {{"kind", layout.kind}, {"source", layout.source}, {"max_attempts", layout.max_attempts}};
  j["image"] = {{"kind", image.kind}, {"source", image.source}, {"timeout_seconds", image.timeout_seconds}};
  j["depth"] = {{"kind", depth.kind}, {"source", depth.source}, {"constant", depth.constant}};
  j["objects"] = {{"kind", objects.kind}, {"source", objects.source}};
  j["cameras"] = {{"width", c.width},
                  {"height", c.height},
                  {"hfov_deg", c.hfov_deg},
                  {"object_hfov_deg", c.object_hfov_deg},
                  {"eye_height", c.eye_height},
                  {"wall_offset", c.wall_offset},
                  {"perimeter_count", c.perimeter_count},
                  {"overhead_count", c.overhead_count},
                  {"overhead_height_fraction", c.overhead_height_fraction},
                  {"overhead_pitch_deg", c.overhead_pitch_deg},
                  {"min_spacing", c.min_spacing},
                  {"clearance", c.clearance}};
  j["structure"] = {{"slab_thickness", structure.slab_thickness}};
  j["texture"] = {{"texels_per_meter", texels_per_meter}, {"tau", projection.tau}};
  j["render"] = {{"near", depth_range.near}, {"far", depth_range.far}};
  j["verify"] = {{"canny_low", verify.canny.low},
                 {"canny_high", verify.canny.high},
                 {"delta", verify.delta},
                 {"threshold", verify.threshold},
                 {"max_retries", max_retries}};
  j["recon"] = {{"stride", stride}, {"voxel", voxel}, {"lambda_s", loss.lambda_s}, {"lambda_d", loss.lambda_d}};
  return j.dump(2) + "\n";
}

RunConfig RunConfig::from_json(std::string_view text) {
  RunConfig cfg;
  try {
    const ojson j = ojson::parse(text);
    if (!j.is_object()) throw Error(ErrorCode::kSchemaError, "config must be a JSON object");
    read_opt(j, "theme", cfg.theme);
    read_opt(j, "seed", cfg.seed);
    if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
    auto section = [&](const char* name) -> const ojson& {
      static const ojson empty = ojson::object();
      return j.contains(name) ? j.at(name) : empty;
    };
    const auto& l = section("layout");
    read_opt(l, "kind", cfg.layout.kind);
    read_opt(l, "source", cfg.layout.source);
    read_opt(l, "max_attempts", cfg.layout.max_attempts);
    const auto& im = section("image");
    read_opt(im, "kind", cfg.image.kind);
    read_opt(im, "source", cfg.image.source);
    read_opt(im, "timeout_seconds", cfg.image.timeout_seconds);
    const auto& d = section("depth");
    read_opt(d, "kind", cfg.depth.kind);
    read_opt(d, "source", cfg.depth.source);
    read_opt(d, "constant", cfg.depth.constant);
    const auto& o = section("objects");
    read_opt(o, "kind", cfg.objects.kind);
    read_opt(o, "source", cfg.objects.source);
    const auto& c = section("cameras");
    auto& cc = cfg.cameras;
    read_opt(c, "width", cc.width);
    read_opt(c, "height", cc.height);
    read_opt(c, "hfov_deg", cc.hfov_deg);
    read_opt(c, "object_hfov_deg", cc.object_hfov_deg);
    read_opt(c, "eye_height", cc.eye_height);
    read_opt(c, "wall_offset", cc.wall_offset);
    read_opt(c, "perimeter_count", cc.perimeter_count);
    read_opt(c, "overhead_count", cc.overhead_count);
    read_opt(c, "overhead_height_fraction", cc.overhead_height_fraction);
    read_opt(c, "overhead_pitch_deg", cc.overhead_pitch_deg);
    read_opt(c, "min_spacing", cc.min_spacing);
    read_opt(c, "clearance", cc.clearance);
    read_opt(section("structure"), "slab_thickness", cfg.structure.slab_thickness);
    const auto& t = section("texture");
    read_opt(t, "texels_per_meter", cfg.texels_per_meter);
    read_opt(t, "tau", cfg.projection.tau);
    const auto& r = section("render");
    read_opt(r, "near", cfg.depth_range.near);
    read_opt(r, "far", cfg.depth_range.far);
    const auto& v = section("verify");
    read_opt(v, "canny_low", cfg.verify.canny.low);
    read_opt(v, "canny_high", cfg.verify.canny.high);
    read_opt(v, "delta", cfg.verify.delta);
    read_opt(v, "threshold", cfg.verify.threshold);
    read_opt(v, "max_retries", cfg.max_retries);
    const auto& rc = section("recon");
    read_opt(rc, "stride", cfg.stride);
    read_opt(rc, "voxel", cfg.voxel);
    read_opt(rc, "lambda_s", cfg.loss.lambda_s);
    read_opt(rc, "lambda_d", cfg.loss.lambda_d);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("config: ") + e.what());
  }
  return cfg;
}

// ---- image adapters --------------------------------------------------------------

Image8 MockImageAdapter::generate(const ImageRequest& req) {
  const Image8& c = req.condition;
  if (c.channels != 3) throw Error(ErrorCode::kAdapterFailure, "mock image adapter expects an RGB condition");
  int base[3];
  if (req.style && req.style->channels == 3 && req.style->pixel_count() > 0) {
    std::uint64_t sum[3] = {0, 0, 0};
    for (std::size_t i = 0; i < req.style->pixel_count(); ++i)
      for (int k = 0; k < 3; ++k) sum[k] += req.style->data[i * 3 + static_cast<std::size_t>(k)];
    for (int k = 0; k < 3; ++k) base[k] = static_cast<int>(sum[k] / req.style->pixel_count());
  } else {
    const auto h = hash64(theme_);
    for (int k = 0; k < 3; ++k) base[k] = 80 + static_cast<int>((h >> (8 * k)) % 141);
  }
  int offset[3];
  const auto s = mix_seed(req.seed, 0x5eed);
  for (int k = 0; k < 3; ++k) offset[k] = static_cast<int>((s >> (16 * k)) % 9) - 4;
  Image8 out(c.width, c.height, 3);
  for (std::size_t i = 0; i < c.pixel_count(); ++i)
    for (int k = 0; k < 3; ++k) {
      const std::size_t idx = i * 3 + static_cast<std::size_t>(k);
      const int v = (4 * c.data[idx] + base[k]) / 5 + offset[k];
      out.data[idx] = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
    }
  return out;
}

std::string image_request_json(const ImageRequest& req) {
  ojson j;
  j["view_id"] = req.view_id;
  j["seed"] = req.seed;
  j["prompt"] = req.prompt;
  j["condition_png"] = base64_encode(encode_png(req.condition));
  j["style_png"] = req.style ? ojson(base64_encode(encode_png(*req.style))) : ojson(nullptr);
  return j.dump();
}

Image8 image_response(const std::string& body) {
  try {
    const auto j = nlohmann::json::parse(body);
    return decode_png(base64_decode(j.at("image_png").get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kAdapterFailure, std::string("image adapter response: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kAdapterFailure) throw;
    throw Error(ErrorCode::kAdapterFailure, std::string("image adapter response: ") + e.what());
  }
}

Image8 DirectoryImageAdapter::generate(const ImageRequest& req) {
  std::string name = req.view_id;
  for (std::size_t p; (p = name.find('/')) != std::string::npos;) name.replace(p, 1, "__");
  std::ostringstream seed_hex;
  seed_hex << std::hex << req.seed;
  const fs::path dir = dir_ / (name + "__s" + seed_hex.str());
  const fs::path response = dir / "image.png";
  if (!fs::exists(response)) {
    fs::create_directories(dir);
    write_png(dir / "condition.png", req.condition);
    if (req.style) write_png(dir / "style.png", *req.style);
    write_text(dir / "prompt.txt", req.prompt);
    write_text(dir / "request.json", ojson{{"view_id", req.view_id}, {"seed", req.seed}}.dump(2) + "\n");
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(timeout_seconds_);
    while (!fs::exists(response)) {
      if (std::chrono::steady_clock::now() >= deadline)
        throw Error(ErrorCode::kAdapterFailure, "no image.png in " + dir.string() + " before the timeout");
      std::this_thread::sleep_for(std::chrono::milliseconds(200));
    }
  }
  try {
    return read_png(response);
  } catch (const Error& e) {
    throw Error(ErrorCode::kAdapterFailure, std::string("unreadable response image: ") + e.what());
  }
}

Image8 CommandImageAdapter::generate(const ImageRequest& req) {
  return image_response(run_command(command_, image_request_json(req)));
}

Image8 HttpImageAdapter::generate(const ImageRequest& req) {
  return image_response(http_post(url_, "application/json", image_request_json(req), timeout_seconds_));
}

// ---- object providers ------------------------------------------------------------

namespace {

ReconstructedObject mock_object(const std::string& id, const std::string& label, const Vec3& half,
                                const Vec3& translation, const Camera& cam) {
  ReconstructedObject o;
  o.id = id;
  o.label = label;
  o.mesh = make_box(-half, half, FaceTag{cam.room_id, Category::kObject, id});
  o.mesh.uvs.clear();
  for (const auto& v : o.mesh.vertices)
    o.mesh.uvs.emplace_back((v.x() + half.x()) / (2 * half.x()), (v.y() + half.y()) / (2 * half.y()));
  o.pose.translation = translation;
  o.source_camera = cam;
  const auto h = hash64(label);
  Image8 tex(8, 8, 3);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      for (int k = 0; k < 3; ++k) {
        const int base = 60 + static_cast<int>((h >> (8 * k)) % 150);
        tex.at(x, y, k) = static_cast<std::uint8_t>(((x + y) % 2) ? base : base + 40);
      }
  o.texture = std::move(tex);
  return o;
}

std::map<std::string, Camera> object_camera_map(const Room& room, const Camera& cam) {
  return {{"object", cam}, {room.id + "/object", cam}};
}

}  // namespace

std::vector<ReconstructedObject> MockObjectProvider::reconstruct(const Room& room, const Camera& cam, const Image8&,
                                                                 const std::string&) {
  std::vector<ReconstructedObject> out;
  out.push_back(mock_object(room.id + "_table", "table", Vec3(0.6, 0.375, 0.35), Vec3(0, -0.8, -2.0), cam));
  out.push_back(mock_object(room.id + "_painting", "painting", Vec3(0.4, 0.3, 0.02), Vec3(1.2, 0.0, -1.5), cam));
  return out;
}

std::vector<ReconstructedObject> DirectoryObjectProvider::reconstruct(const Room& room, const Camera& cam,
                                                                      const Image8&, const std::string&) {
  return load_objects(dir_ / room.id, object_camera_map(room, cam));
}

std::vector<ReconstructedObject> CommandObjectProvider::reconstruct(const Room& room, const Camera& cam,
                                                                    const Image8& image, const std::string& prompt) {
  const fs::path out = fs::absolute(work_dir_ / room.id);
  fs::create_directories(out);
  ojson j{{"room", room.id},
          {"prompt", prompt},
          {"image_png", base64_encode(encode_png(image))},
          {"out_dir", out.string()}};
  run_command(command_, j.dump());
  try {
    return load_objects(out, object_camera_map(room, cam));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kAdapterFailure) throw;
    throw Error(ErrorCode::kAdapterFailure, std::string("object command output: ") + e.what());
  }
}

// ---- factories -----------------------------------------------------------------

std::unique_ptr<LayoutProvider> make_layout_provider(const RunConfig& cfg) {
  const auto& l = cfg.layout;
  if (l.kind == "file") {
    std::string doc;
    try {
      doc = read_text(l.source);
    } catch (const Error& e) {
      throw Error(ErrorCode::kAdapterFailure, std::string("layout file: ") + e.what());
    }
    return std::make_unique<SequenceLayoutProvider>(
        std::vector<std::string>(static_cast<std::size_t>(std::max(1, l.max_attempts)), doc));
  }
  if (l.kind == "directory") return std::make_unique<DirectoryLayoutProvider>(l.source);
  if (l.kind == "command") return std::make_unique<CommandLayoutProvider>(env_or(l.source, kLayoutEndpointEnv));
  if (l.kind == "http") return std::make_unique<HttpLayoutProvider>(env_or(l.source, kLayoutEndpointEnv));
  throw Error(ErrorCode::kInvalidArgument, "unknown layout provider '" + l.kind + "'");
}

std::unique_ptr<ImageAdapter> make_image_adapter(const RunConfig& cfg) {
  const auto& im = cfg.image;
  if (im.kind == "mock") return std::make_unique<MockImageAdapter>(cfg.theme);
  if (im.kind == "dir") return std::make_unique<DirectoryImageAdapter>(im.source, im.timeout_seconds);
  if (im.kind == "command") return std::make_unique<CommandImageAdapter>(env_or(im.source, kImageEndpointEnv));
  if (im.kind == "http") return std::make_unique<HttpImageAdapter>(env_or(im.source, kImageEndpointEnv), im.timeout_seconds);
  throw Error(ErrorCode::kInvalidArgument, "unknown image adapter '" + im.kind + "'");
}

std::unique_ptr<DepthAdapter> make_depth_adapter(const RunConfig& cfg) {
  const auto& d = cfg.depth;
  if (d.kind == "echo") return std::make_unique<EchoDepthAdapter>();
  if (d.kind == "constant") return std::make_unique<ConstantDepthAdapter>(d.constant);
  if (d.kind == "stored") return std::make_unique<StoredDepthAdapter>(d.source);
  if (d.kind == "command") return std::make_unique<CommandDepthAdapter>(env_or(d.source, kDepthEndpointEnv));
  if (d.kind == "http") return std::make_unique<HttpDepthAdapter>(env_or(d.source, kDepthEndpointEnv));
  throw Error(ErrorCode::kInvalidArgument, "unknown depth adapter '" + d.kind + "'");
}

std::unique_ptr<ObjectProvider> make_object_provider(const RunConfig& cfg) {
  const auto& o = cfg.objects;
  if (o.kind == "none") return nullptr;
  if (o.kind == "mock") return std::make_unique<MockObjectProvider>();
  if (o.kind == "dir") return std::make_unique<DirectoryObjectProvider>(o.source);
  if (o.kind == "command")
    return std::make_unique<CommandObjectProvider>(env_or(o.source, kObjectEndpointEnv), cfg.out_dir / "objects" / "work");
  throw Error(ErrorCode::kInvalidArgument, "unknown object source '" + o.kind + "'");
}

// ---- prompts -------------------------------------------------------------------

std::string synthesis_prompt(const std::string& theme) {
  std::string text(resources::iterative_prompt());
  const std::string slot = "{theme}";
  for (std::size_t p = 0; (p = text.find(slot, p)) != std::string::npos; p += theme.size()) text.replace(p, slot.size(), theme);
  return text;
}

std::string object_prompt(const Room& room, const std::string& theme) {
  int doors = 0, windows = 0;
  auto count = [&](const Opening& o) { (o.walkable() ? doors : windows) += 1; };
  for (const auto& o : room.openings)
    if (!o.mirrored) count(o);
  for (const auto& l : room.linked) count(l.opening);
  std::ostringstream s;
  s << "A photograph of a furnished " << (room.kind.empty() ? std::string("room") : room.kind) << " in " << theme
    << ". Eye-level wide shot showing all furniture standing on the floor and mounted on the walls. The room has "
    << doors << (doors == 1 ? " doorway" : " doorways") << " and " << windows << (windows == 1 ? " window" : " windows")
    << ".";
  return s.str();
}

std::string camera_id(const std::string& room_id, int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "c%02d", index);
  return room_id + "/" + buf;
}

std::string named_cameras_to_jsonl(const std::vector<NamedCamera>& cams) {
  std::string out;
  for (const auto& c : cams) out += "{\"id\":" + ojson(c.id).dump() + "," + camera_to_json(c.cam).substr(1) + "\n";
  return out;
}

std::vector<NamedCamera> named_cameras_from_jsonl(std::string_view text) {
  std::vector<NamedCamera> out;
  std::map<std::string, int> per_room;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Camera cam = camera_from_json(line);
    const int k = per_room[cam.room_id]++;
    std::string id;
    try {
      const auto j = nlohmann::json::parse(line);
      id = j.contains("id") ? j.at("id").get<std::string>() : camera_id(cam.room_id, k);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kSchemaError, std::string("camera record: ") + e.what());
    }
    out.push_back({std::move(id), std::move(cam)});
  }
  return out;
}

std::string CameraPlan::schedule_json() const {
  ojson j = ojson::array();
  for (const auto& rs : schedules) j.push_back({{"room", rs.room}, {"order", rs.order}, {"style_ref", rs.style_ref}});
  return j.dump(2) + "\n";
}

CameraPlan plan_cameras(const FloorPlan& plan, const TriMesh* scene, const CameraConfig& cfg) {
  CameraPlan out;
  const auto runs = wall_runs(plan);
  ojson nudges = ojson::array();
  for (std::size_t ri = 0; ri < plan.rooms.size(); ++ri) {
    const Room& room = plan.rooms[ri];
    const Polygon2D region = inner_outline(runs, static_cast<int>(ri));
    const auto cams = room_cameras(room, plan.wall_thickness, cfg);
    std::vector<NamedCamera> kept;
    for (std::size_t k = 0; k < cams.size(); ++k) {
      const std::string id = camera_id(room.id, static_cast<int>(k));
      if (!scene) {
        kept.push_back({id, cams[k]});
        continue;
      }
      try {
        Camera c = nudge_away_from_objects(cams[k], *scene, cfg.clearance, room.floor.centroid(), &region);
        const double moved = (c.position - cams[k].position).norm();
        nudges.push_back({{"camera_id", id}, {"status", moved > 0 ? "moved" : "unchanged"}, {"displacement", moved}});
        kept.push_back({id, c});
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNoFreeSpace || k < 2) throw;
        nudges.push_back({{"camera_id", id}, {"status", "dropped"}, {"displacement", 0.0}});
      }
    }
    std::vector<Camera> plain;
    for (const auto& nc : kept) plain.push_back(nc.cam);
    const SynthesisSchedule s = schedule_synthesis(plain, {0, 1});
    RoomSchedule rs{room.id, {}, s.style_ref};
    for (int idx : s.order) rs.order.push_back(kept[static_cast<std::size_t>(idx)].id);
    out.schedules.push_back(std::move(rs));
    for (auto& nc : kept) out.cameras.push_back(std::move(nc));
  }
  out.nudge_json = nudges.dump(2) + "\n";
  return out;
}

// ---- manifest ------------------------------------------------------------------

const StageRecord* RunManifest::stage(std::string_view name) const {
  for (const auto& s : stages)
    if (s.name == name) return &s;
  return nullptr;
}

std::string RunManifest::to_json() const {
  ojson j;
  j["format"] = "worldmesh-run/1";
  j["config"] = config_json.empty() ? ojson::object() : ojson::parse(config_json);
  j["stages"] = ojson::array();
  for (const auto& s : stages) {
    ojson a = ojson::object();
    for (const auto& [path, hash] : s.artifacts) a[path] = hash;
    j["stages"].push_back({{"name", s.name}, {"artifacts", a}});
  }
  j["schedules"] = ojson::array();
  for (const auto& s : schedules) j["schedules"].push_back({{"room", s.room}, {"order", s.order}, {"style_ref", s.style_ref}});
  j["views"] = ojson::array();
  for (const auto& v : views) {
    ojson att = ojson::array();
    for (const auto& a : v.attempts)
      att.push_back({{"seed", a.seed},
                     {"recall", a.result.recall},
                     {"threshold", a.result.threshold},
                     {"pass", a.result.pass},
                     {"mesh_edge_pixels", a.result.mesh_edge_pixels},
                     {"matched_pixels", a.result.matched_pixels}});
    j["views"].push_back({{"stage", v.stage},
                          {"room", v.room},
                          {"camera_id", v.camera_id},
                          {"position", v.position},
                          {"style_ref", v.style_ref},
                          {"attempts", att},
                          {"accepted", v.accepted},
                          {"image", v.image},
                          {"image_sha256", v.image_sha256},
                          {"texels_written", v.texels_written}});
  }
  j["failure"] = failed_stage.empty() ? ojson(nullptr) : ojson{{"stage", failed_stage}, {"error", failure}};
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(std::string_view text) {
  RunManifest m;
  try {
    const ojson j = ojson::parse(text);
    if (j.contains("config")) m.config_json = j.at("config").dump(2) + "\n";
    for (const auto& s : j.at("stages")) {
      StageRecord r;
      r.name = s.at("name").get<std::string>();
      for (const auto& [k, v] : s.at("artifacts").items()) r.artifacts[k] = v.get<std::string>();
      m.stages.push_back(std::move(r));
    }
    for (const auto& s : j.at("schedules"))
      m.schedules.push_back({s.at("room").get<std::string>(), s.at("order").get<std::vector<std::string>>(),
                             s.at("style_ref").get<std::vector<int>>()});
    for (const auto& v : j.at("views")) {
      ViewRecord r;
      r.stage = v.at("stage").get<std::string>();
      r.room = v.at("room").get<std::string>();
      r.camera_id = v.at("camera_id").get<std::string>();
      r.position = v.at("position").get<int>();
      r.style_ref = v.at("style_ref").get<std::string>();
      for (const auto& a : v.at("attempts")) {
        AttemptRecord ar;
        ar.seed = a.at("seed").get<std::uint64_t>();
        ar.result.recall = a.at("recall").get<double>();
        ar.result.threshold = a.at("threshold").get<double>();
        ar.result.pass = a.at("pass").get<bool>();
        ar.result.mesh_edge_pixels = a.at("mesh_edge_pixels").get<std::size_t>();
        ar.result.matched_pixels = a.at("matched_pixels").get<std::size_t>();
        r.attempts.push_back(ar);
      }
      r.accepted = v.at("accepted").get<bool>();
      r.image = v.at("image").get<std::string>();
      r.image_sha256 = v.at("image_sha256").get<std::string>();
      r.texels_written = v.at("texels_written").get<std::size_t>();
      m.views.push_back(std::move(r));
    }
    if (j.contains("failure") && !j.at("failure").is_null()) {
      m.failed_stage = j.at("failure").at("stage").get<std::string>();
      m.failure = j.at("failure").at("error").get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("manifest: ") + e.what());
  }
  return m;
}

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {"layout", "structmesh", "objects", "cameras",
                                                 "bootstrap", "synthesis", "export"};
  return names;
}

// ---- stages --------------------------------------------------------------------

namespace {

class Run {
 public:
  Run(const RunConfig& cfg, RunManifest& man) : cfg_(cfg), root_(cfg.out_dir), man_(man) {}

  void layout();
  void structmesh();
  void objects();
  void cameras();
  void bootstrap();
  void synthesis();
  void export_scene();

 private:
  fs::path require(const std::string& rel, const std::string& stage) const {
    const fs::path p = root_ / rel;
    if (!fs::exists(p))
      throw Error(ErrorCode::kMissingPriorArtifact, "stage '" + stage + "' needs " + rel + "; run the earlier stages first");
    return p;
  }
  FloorPlan plan(const std::string& stage) const { return load_layout(require("layout/layout.json", stage)); }
  TriMesh struct_mesh(const std::string& stage) const { return read_mesh(require("structmesh/struct.wmesh", stage)); }
  TriMesh geo_mesh(const std::string& stage) const { return read_mesh(require("objects/geo.wmesh", stage)); }
  ObjectTextures object_textures(const std::string& stage) const;
  std::vector<NamedCamera> room_cams(const std::string& stage) const;
  std::vector<RoomSchedule> schedules(const std::string& stage) const;

  // Generates, verifies and projects one view; throws Error{kVerificationExhausted}.
  Image8 produce(const std::string& stage, const TriMesh& geo, const ObjectTextures& tex, TextureAtlas& atlas,
                 const NamedCamera& view, int position, const Image8* style, const std::string& style_id);
  ImageAdapter& images() {
    if (!image_adapter_) image_adapter_ = make_image_adapter(cfg_);
    return *image_adapter_;
  }
  DepthAdapter& depths() {
    if (!depth_adapter_) depth_adapter_ = make_depth_adapter(cfg_);
    return *depth_adapter_;
  }
  static std::string image_rel(const std::string& stage, const std::string& id) { return stage + "/images/" + id + ".png"; }

  const RunConfig& cfg_;
  fs::path root_;
  RunManifest& man_;
  std::unique_ptr<ImageAdapter> image_adapter_;
  std::unique_ptr<DepthAdapter> depth_adapter_;
};

ObjectTextures Run::object_textures(const std::string& stage) const {
  require("objects/geo.wmesh", stage);
  ObjectTextures out;
  const fs::path dir = root_ / "objects" / "textures";
  if (!fs::is_directory(dir)) return out;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".png") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) out[f.stem().string()] = read_png(f);
  return out;
}

std::vector<NamedCamera> Run::room_cams(const std::string& stage) const {
  return named_cameras_from_jsonl(read_text(require("cameras/cameras.jsonl", stage)));
}

std::vector<RoomSchedule> Run::schedules(const std::string& stage) const {
  const auto j = ojson::parse(read_text(require("cameras/schedule.json", stage)));
  std::vector<RoomSchedule> out;
  for (const auto& s : j)
    out.push_back({s.at("room").get<std::string>(), s.at("order").get<std::vector<std::string>>(),
                   s.at("style_ref").get<std::vector<int>>()});
  return out;
}

void Run::layout() {
  auto provider = make_layout_provider(cfg_);
  auto write_reports = [&](const std::vector<ValidationReport>& reports) {
    std::string out = "[\n";
    for (std::size_t i = 0; i < reports.size(); ++i) out += (i ? ",\n" : "") + reports[i].to_json();
    put_text(root_ / "layout" / "validation.json", out + "]\n");
  };
  try {
    const SampleResult r = sample_until_valid(*provider, cfg_.theme, cfg_.layout.max_attempts);
    write_reports(r.reports);
    put_text(root_ / "layout" / "layout.json", serialize_layout(r.plan));
  } catch (const LayoutExhausted& e) {
    write_reports(e.reports());
    throw;
  }
}

void Run::structmesh() {
  const FloorPlan p = plan("structmesh");
  const TriMesh m = assemble_struct_mesh(p, cfg_.structure);
  fs::create_directories(root_ / "structmesh");
  write_mesh(root_ / "structmesh" / "struct.wmesh", m);
  export_glb(m, root_ / "structmesh" / "struct.glb");
}

void Run::objects() {
  const FloorPlan p = plan("objects");
  const TriMesh st = struct_mesh("objects");
  auto provider = make_object_provider(cfg_);
  std::map<std::string, std::vector<ReconstructedObject>> by_room;
  for (const Room& room : p.rooms) {
    Camera cam = bootstrap_cameras(room, p.wall_thickness, cfg_.cameras)[0];
    set_intrinsics(cam, cfg_.cameras.width, cfg_.cameras.height, cfg_.cameras.object_hfov_deg);
    const fs::path dir = root_ / "objects" / room.id;
    put_text(dir / "camera.json", camera_to_json(cam) + "\n");
    if (!provider) continue;
    ImageRequest req;
    req.condition = render_condition(st, cam, TextureAtlas{}, {}, cfg_.depth_range).rgb;
    req.prompt = object_prompt(room, cfg_.theme);
    req.view_id = room.id + "/object";
    req.seed = view_seed(cfg_.seed, req.view_id, 0);
    const Image8 source = images().generate(req);
    put_png(dir / "condition.png", req.condition);
    put_png(dir / "source.png", source);
    put_text(dir / "prompt.txt", req.prompt + "\n");
    by_room[room.id] = provider->reconstruct(room, cam, source, req.prompt);
  }
  const GeoResult geo = build_m_geo(p, st, by_room);
  write_mesh(root_ / "objects" / "geo.wmesh", geo.mesh);
  export_glb(geo.mesh, root_ / "objects" / "geo.glb");
  std::string report = "[\n";
  for (std::size_t i = 0; i < p.rooms.size(); ++i) report += (i ? ",\n" : "") + geo.report_json(p.rooms[i].id);
  put_text(root_ / "objects" / "placement.json", report + "]\n");
  for (const auto& [id, tex] : geo.textures) put_png(root_ / "objects" / "textures" / (id + ".png"), tex);
}

void Run::cameras() {
  const FloorPlan p = plan("cameras");
  const TriMesh geo = geo_mesh("cameras");
  const CameraPlan cp = plan_cameras(p, &geo, cfg_.cameras);
  man_.schedules = cp.schedules;
  put_text(root_ / "cameras" / "cameras.jsonl", named_cameras_to_jsonl(cp.cameras));
  put_text(root_ / "cameras" / "nudge.json", cp.nudge_json);
  put_text(root_ / "cameras" / "schedule.json", cp.schedule_json());
}

Image8 Run::produce(const std::string& stage, const TriMesh& geo, const ObjectTextures& tex, TextureAtlas& atlas,
                    const NamedCamera& view, int position, const Image8* style, const std::string& style_id) {
  const Camera& cam = view.cam;
  ViewRecord rec;
  rec.stage = stage;
  rec.room = cam.room_id;
  rec.camera_id = view.id;
  rec.position = position;
  rec.style_ref = style ? style_id : "";
  ImageRequest req;
  req.condition = render_condition(geo, cam, atlas, tex, cfg_.depth_range).rgb;
  if (style) req.style = *style;
  req.prompt = synthesis_prompt(cfg_.theme);
  req.view_id = view.id;
  const DepthMap scaffold = render_depth(geo, cam);
  auto* echo = dynamic_cast<EchoDepthAdapter*>(&depths());
  Image8 accepted;
  for (int a = 0; a < cfg_.max_retries && !rec.accepted; ++a) {
    req.seed = view_seed(cfg_.seed, view.id, a);
    Image8 img = images().generate(req);
    if (img.width != cam.width || img.height != cam.height || img.channels != 3)
      throw Error(ErrorCode::kAdapterFailure, "image adapter returned " + std::to_string(img.width) + "x" +
                                                  std::to_string(img.height) + "x" + std::to_string(img.channels) +
                                                  " for view " + view.id);
    if (echo) echo->set(scaffold);
    const VerificationResult r = verify_image(img, scaffold, depths(), cfg_.verify);
    rec.attempts.push_back({req.seed, r});
    if (r.pass) {
      rec.accepted = true;
      accepted = std::move(img);
    }
  }
  if (!rec.accepted) {
    man_.views.push_back(std::move(rec));
    throw Error(ErrorCode::kVerificationExhausted,
                "view " + view.id + " failed verification in " + std::to_string(cfg_.max_retries) + " attempts");
  }
  rec.image = image_rel(stage, view.id);
  put_png(root_ / rec.image, accepted);
  rec.image_sha256 = sha256_file(root_ / rec.image);
  rec.texels_written = project_image(geo, cam, accepted, scaffold, cam.room_id, atlas, cfg_.projection);
  man_.views.push_back(std::move(rec));
  return accepted;
}

std::map<std::string, NamedCamera> by_id(const std::vector<NamedCamera>& cams) {
  std::map<std::string, NamedCamera> out;
  for (const auto& c : cams) out.emplace(c.id, c);
  return out;
}

void Run::bootstrap() {
  const FloorPlan p = plan("bootstrap");
  const TriMesh st = struct_mesh("bootstrap");
  const TriMesh geo = geo_mesh("bootstrap");
  const ObjectTextures tex = object_textures("bootstrap");
  const auto cams = by_id(room_cams("bootstrap"));
  const auto scheds = schedules("bootstrap");
  TextureAtlas atlas = build_atlas(p, st, cfg_.texels_per_meter);
  std::optional<Image8> chain;
  std::string chain_id;
  for (const auto& s : scheds) {
    if (s.order.size() < 2) throw Error(ErrorCode::kInvariantError, "room " + s.room + " has fewer than two cameras");
    const auto& c0 = cams.at(s.order[0]);
    const auto& c1 = cams.at(s.order[1]);
    Image8 i0 = produce("bootstrap", geo, tex, atlas, c0, 0, chain ? &*chain : nullptr, chain_id);
    produce("bootstrap", geo, tex, atlas, c1, 1, &i0, c0.id);
    if (!chain) {
      chain = std::move(i0);
      chain_id = c0.id;
    }
  }
  save_atlas(atlas, root_ / "bootstrap" / "atlas");
}

void Run::synthesis() {
  const TriMesh geo = geo_mesh("synthesis");
  const ObjectTextures tex = object_textures("synthesis");
  const auto cams = by_id(room_cams("synthesis"));
  const auto scheds = schedules("synthesis");
  TextureAtlas atlas = load_atlas(require("bootstrap/atlas", "synthesis"));
  for (const auto& s : scheds) {
    std::vector<Image8> done;
    for (std::size_t pos = 0; pos < s.order.size(); ++pos) {
      if (pos < 2) {
        done.push_back(read_png(require(image_rel("bootstrap", s.order[pos]), "synthesis")));
        continue;
      }
      const int ref = s.style_ref[pos];
      done.push_back(produce("synthesis", geo, tex, atlas, cams.at(s.order[pos]), static_cast<int>(pos),
                             &done[static_cast<std::size_t>(ref)], s.order[static_cast<std::size_t>(ref)]));
    }
  }
  save_atlas(atlas, root_ / "synthesis" / "atlas");
}

void Run::export_scene() {
  const TriMesh geo = geo_mesh("export");
  const ObjectTextures tex = object_textures("export");
  const auto cam_list = room_cams("export");
  const auto cams = by_id(cam_list);
  const TextureAtlas atlas = load_atlas(require("synthesis/atlas", "export"));
  if (!man_.stage("synthesis")) throw Error(ErrorCode::kMissingPriorArtifact, "stage 'export' needs a completed synthesis stage");
  const fs::path out = root_ / "export";
  fs::create_directories(out);

  const BakedMesh baked = bake_atlas(geo, atlas, tex);
  export_glb(baked.mesh, out / "scene.glb", baked.textures);
  save_atlas(atlas, out / "atlas");
  put_text(out / "cameras.jsonl", named_cameras_to_jsonl(cam_list));

  auto* echo = dynamic_cast<EchoDepthAdapter*>(&depths());
  std::vector<PointCloud> clouds;
  ojson images_json = ojson::array();
  ojson loss_views = ojson::array();
  LossBreakdown mean;
  mean.weights = cfg_.loss;
  std::size_t n = 0;
  for (const auto& v : man_.views) {
    if (!v.accepted) continue;
    const Camera& cam = cams.at(v.camera_id).cam;
    const Image8 img = read_png(require(v.image, "export"));
    if (sha256_file(root_ / v.image) != v.image_sha256)
      throw Error(ErrorCode::kMissingPriorArtifact, v.image + " does not match the manifest hash");
    images_json.push_back({{"camera_id", v.camera_id}, {"image", v.image}, {"sha256", v.image_sha256}});
    const DepthMap depth = render_depth(geo, cam);
    clouds.push_back(backproject(depth, cam, &img, cfg_.stride, v.camera_id));
    if (echo) echo->set(depth);
    const DepthMap est = depths().estimate(img);
    const Image8 rendered = render_color(geo, cam, atlas, tex, cfg_.depth_range);
    LossBreakdown l;
    try {
      l = loss_eval(to_float(rendered), to_float(img), depth, est, cfg_.loss);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoValidDepthPixels) throw;
      continue;
    }
    loss_views.push_back(
        {{"camera_id", v.camera_id}, {"l1", l.l1}, {"dssim", l.dssim}, {"depth_l1", l.depth_l1}, {"total", l.total}});
    mean.l1 += l.l1;
    mean.dssim += l.dssim;
    mean.depth_l1 += l.depth_l1;
    mean.total += l.total;
    ++n;
  }
  if (n > 0) {
    const double k = static_cast<double>(n);
    mean.l1 /= k;
    mean.dssim /= k;
    mean.depth_l1 /= k;
    mean.total /= k;
  }
  write_ply(out / "cloud.ply", merge_clouds(clouds, cfg_.voxel));
  put_text(out / "images.json", images_json.dump(2) + "\n");
  ojson loss{{"lambda_s", cfg_.loss.lambda_s},
             {"lambda_d", cfg_.loss.lambda_d},
             {"views", loss_views},
             {"mean", {{"l1", mean.l1}, {"dssim", mean.dssim}, {"depth_l1", mean.depth_l1}, {"total", mean.total}}}};
  put_text(out / "loss.json", loss.dump(2) + "\n");
}

std::map<std::string, std::string> hash_tree(const fs::path& root, const std::string& stage) {
  std::map<std::string, std::string> out;
  const fs::path dir = root / stage;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = sha256_file(e.path());
  return out;
}

std::string strip_code(const Error& e) {
  std::string msg = e.what();
  const std::string prefix = std::string(to_string(e.code())) + ": ";
  if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
  return msg;
}

}  // namespace

RunManifest run_stage(const RunConfig& config, std::string_view stage) {
  config.validate();
  const auto& names = stage_names();
  const auto it = std::find(names.begin(), names.end(), stage);
  if (it == names.end()) throw Error(ErrorCode::kInvalidArgument, "unknown stage '" + std::string(stage) + "'");
  if (config.out_dir.empty()) throw Error(ErrorCode::kInvalidArgument, "config: out_dir is required");
  const fs::path root = config.out_dir;
  const fs::path manifest_path = root / "manifest.json";
  fs::create_directories(root);

  RunManifest man;
  if (fs::exists(manifest_path)) man = RunManifest::from_json(read_text(manifest_path));
  man.config_json = config.to_json();
  man.failed_stage.clear();
  man.failure.clear();
  // This stage and everything after it are superseded.
  const std::set<std::string> stale(it, names.end());
  std::erase_if(man.stages, [&](const StageRecord& s) { return stale.count(s.name) > 0; });
  std::erase_if(man.views, [&](const ViewRecord& v) { return stale.count(v.stage) > 0; });
  if (stale.count("cameras")) man.schedules.clear();
  for (const auto& s : stale) fs::remove_all(root / s);

  const std::string name(stage);
  Run run(config, man);
  try {
    if (name == "layout") run.layout();
    else if (name == "structmesh") run.structmesh();
    else if (name == "objects") run.objects();
    else if (name == "cameras") run.cameras();
    else if (name == "bootstrap") run.bootstrap();
    else if (name == "synthesis") run.synthesis();
    else run.export_scene();
  } catch (const Error& e) {
    man.failed_stage = name;
    man.failure = e.what();
    write_text(manifest_path, man.to_json());
    if (dynamic_cast<const LayoutExhausted*>(&e)) throw;
    throw Error(e.code(), "stage " + name + ": " + strip_code(e));
  } catch (const std::exception& e) {
    man.failed_stage = name;
    man.failure = e.what();
    write_text(manifest_path, man.to_json());
    throw;
  }
  man.stages.push_back({name, hash_tree(root, name)});
  write_text(manifest_path, man.to_json());
  return man;
}

RunManifest run_generate(const RunConfig& config) {
  RunManifest man;
  for (const auto& s : stage_names()) man = run_stage(config, s);
  return man;
}

}  // namespace worldmesh
