#include <filesystem>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "worldmesh/glb.hpp"
#include "worldmesh/meshio.hpp"
#include "worldmesh/pipeline.hpp"

using namespace worldmesh;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kFailure = 1, kValidation = 2, kAdapter = 3, kVerification = 4 };

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::kSchemaError:
    case ErrorCode::kInvariantError:
    case ErrorCode::kExhaustedAttempts:
    case ErrorCode::kOpeningOutsideWall:
    case ErrorCode::kInvalidArgument:
      return kValidation;
    case ErrorCode::kAdapterFailure:
      return kAdapter;
    case ErrorCode::kVerificationExhausted:
      return kVerification;
    default:
      return kFailure;
  }
}

TriMesh load_mesh(const fs::path& path) {
  if (path.extension() == ".wmesh") return read_mesh(path);
  return merge_primitives(import_glb(path));
}

void save_mesh(const TriMesh& mesh, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (path.extension() == ".wmesh")
    write_mesh(path, mesh);
  else
    export_glb(mesh, path);
}

const NamedCamera& find_camera(const std::vector<NamedCamera>& cams, const std::string& id) {
  for (const auto& c : cams)
    if (c.id == id) return c;
  throw Error(ErrorCode::kInvalidArgument, "no camera '" + id + "' in the camera file");
}

ObjectTextures load_textures(const std::string& dir) {
  ObjectTextures out;
  if (dir.empty()) return out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".png") out[e.path().stem().string()] = read_png(e.path());
  return out;
}

void add_camera_options(CLI::App* app, CameraConfig& c) {
  app->add_option("--width", c.width, "image width in pixels");
  app->add_option("--height", c.height, "image height in pixels");
  app->add_option("--hfov", c.hfov_deg, "horizontal field of view in degrees");
  app->add_option("--eye-height", c.eye_height, "eye level in meters");
  app->add_option("--wall-offset", c.wall_offset, "perimeter camera wall offset in meters");
  app->add_option("--perimeter", c.perimeter_count, "perimeter cameras per room");
  app->add_option("--overhead", c.overhead_count, "overhead cameras per room");
  app->add_option("--clearance", c.clearance, "object clearance for nudging in meters");
}

std::unique_ptr<DepthAdapter> depth_adapter(const std::string& kind, const std::string& source, double constant) {
  RunConfig cfg;
  cfg.depth = {kind, source, constant};
  return make_depth_adapter(cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"worldmesh: geometry-first indoor scene scaffolding"};
  app.require_subcommand(1);

  // validate-layout
  std::string layout_path;
  auto* validate = app.add_subcommand("validate-layout", "Parse and validate a floor-plan layout");
  validate->add_option("layout", layout_path, "layout JSON")->required();

  // build-mesh
  std::string mesh_out;
  StructOptions struct_opts;
  auto* build = app.add_subcommand("build-mesh", "Build the structural mesh of a layout");
  build->add_option("layout", layout_path, "layout JSON")->required();
  build->add_option("-o,--out", mesh_out, "output .glb or .wmesh")->required();
  build->add_option("--slab", struct_opts.slab_thickness, "floor/ceiling slab thickness");

  // plan-cameras
  std::string scene_path, cameras_out, schedule_out;
  CameraConfig cam_cfg;
  auto* plan_cmd = app.add_subcommand("plan-cameras", "Generate, nudge and schedule the per-room cameras");
  plan_cmd->add_option("layout", layout_path, "layout JSON")->required();
  plan_cmd->add_option("--scene", scene_path, "scene mesh with objects to nudge away from");
  plan_cmd->add_option("-o,--out", cameras_out, "cameras JSON lines")->required();
  plan_cmd->add_option("--schedule", schedule_out, "write the synthesis schedule here");
  add_camera_options(plan_cmd, cam_cfg);

  // render
  std::string mesh_path, cameras_path, camera_name, image_out, mode = "depth", atlas_dir, textures_dir, pfm_out;
  DepthRange range;
  auto* render = app.add_subcommand("render", "Render one camera view of a mesh");
  render->add_option("--mesh", mesh_path, "scene .glb or .wmesh")->required();
  render->add_option("--cameras", cameras_path, "cameras JSON lines")->required();
  render->add_option("--camera", camera_name, "camera id")->required();
  render->add_option("-o,--out", image_out, "output PNG")->required();
  render->add_option("--mode", mode, "depth | condition | color")->check(CLI::IsMember({"depth", "condition", "color"}));
  render->add_option("--atlas", atlas_dir, "texture atlas directory");
  render->add_option("--object-textures", textures_dir, "directory of <object id>.png");
  render->add_option("--near", range.near, "near depth for gray encoding");
  render->add_option("--far", range.far, "far depth for gray encoding");
  render->add_option("--pfm", pfm_out, "also write the metric depth map");

  // place-objects
  std::string objects_dir, out_dir;
  auto* place = app.add_subcommand("place-objects", "Place reconstructed objects into the structural mesh");
  place->add_option("layout", layout_path, "layout JSON")->required();
  place->add_option("--objects", objects_dir, "object manifest directory")->required();
  place->add_option("--cameras", cameras_path, "cameras JSON lines resolving source_camera_id")->required();
  place->add_option("-o,--out", out_dir, "output directory")->required();

  // texture
  std::string images_dir;
  double texels = kDefaultTexelDensity;
  ProjectOptions proj;
  auto* texture = app.add_subcommand("texture", "Project images into a texture atlas");
  texture->add_option("layout", layout_path, "layout JSON")->required();
  texture->add_option("--mesh", mesh_path, "scene .glb or .wmesh")->required();
  texture->add_option("--cameras", cameras_path, "cameras JSON lines")->required();
  texture->add_option("--images", images_dir, "directory of <camera id>.png")->required();
  texture->add_option("-o,--out", atlas_dir, "atlas output directory")->required();
  texture->add_option("--texels-per-meter", texels, "atlas density");
  texture->add_option("--tau", proj.tau, "occlusion tolerance in meters");

  // verify
  std::string image_path, depth_kind = "stored", depth_source;
  double depth_constant = 3.0;
  VerifyOptions vopts;
  auto* verify = app.add_subcommand("verify", "Check a generated image against the scaffold depth edges");
  verify->add_option("--mesh", mesh_path, "scene .glb or .wmesh")->required();
  verify->add_option("--cameras", cameras_path, "cameras JSON lines")->required();
  verify->add_option("--camera", camera_name, "camera id")->required();
  verify->add_option("--image", image_path, "generated image PNG")->required();
  verify->add_option("--depth-adapter", depth_kind, "echo | constant | stored | command | http")
      ->check(CLI::IsMember({"echo", "constant", "stored", "command", "http"}));
  verify->add_option("--depth-source", depth_source, "directory, command or URL");
  verify->add_option("--depth-constant", depth_constant, "value for the constant adapter");
  verify->add_option("--delta", vopts.delta, "dilation radius in pixels");
  verify->add_option("--threshold", vopts.threshold, "recall threshold");

  // backproject
  std::string ply_out;
  int stride = kDefaultStride;
  double voxel = kDefaultVoxel;
  auto* back = app.add_subcommand("backproject", "Back-project rendered depth into a merged point cloud");
  back->add_option("--mesh", mesh_path, "scene .glb or .wmesh")->required();
  back->add_option("--cameras", cameras_path, "cameras JSON lines")->required();
  back->add_option("--images", images_dir, "optional directory of <camera id>.png for colors");
  back->add_option("-o,--out", ply_out, "output PLY")->required();
  back->add_option("--stride", stride, "pixel stride");
  back->add_option("--voxel", voxel, "merge voxel size in meters");

  // generate
  std::string config_path, stage, gen_out, theme, layout_source, layout_kind, image_kind, image_source, gen_depth_kind,
      gen_depth_source, object_kind, object_source;
  std::optional<std::uint64_t> seed;
  std::optional<int> width, height, max_retries, perimeter, overhead;
  bool print_config = false;
  auto* gen = app.add_subcommand("generate", "Run the full pipeline (or one stage) with the configured adapters");
  gen->add_option("--config", config_path, "run configuration JSON");
  gen->add_option("--out", gen_out, "run directory");
  gen->add_option("--theme", theme, "scene description");
  gen->add_option("--seed", seed, "run seed");
  gen->add_option("--layout", layout_source, "layout file, directory, command or URL");
  gen->add_option("--layout-provider", layout_kind, "file | directory | command | http");
  gen->add_option("--image-adapter", image_kind, "mock | dir | command | http");
  gen->add_option("--image-source", image_source, "exchange directory, command or URL");
  gen->add_option("--depth-adapter", gen_depth_kind, "echo | constant | stored | command | http");
  gen->add_option("--depth-source", gen_depth_source, "directory, command or URL");
  gen->add_option("--object-source", object_kind, "none | mock | dir | command");
  gen->add_option("--object-path", object_source, "object directory or command");
  gen->add_option("--width", width, "image width");
  gen->add_option("--height", height, "image height");
  gen->add_option("--perimeter", perimeter, "perimeter cameras per room");
  gen->add_option("--overhead", overhead, "overhead cameras per room");
  gen->add_option("--max-retries", max_retries, "generation attempts per view");
  gen->add_option("--stage", stage, "run only this stage")->check(CLI::IsMember(stage_names()));
  gen->add_flag("--print-config", print_config, "print the resolved configuration and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }

  try {
    if (*validate) {
      const FloorPlan plan = load_layout(layout_path);
      const ValidationReport report = validate_layout(plan);
      std::cout << report.to_json();
      return report.valid() ? kOk : kValidation;
    }
    if (*build) {
      const TriMesh mesh = assemble_struct_mesh(load_layout(layout_path), struct_opts);
      save_mesh(mesh, mesh_out);
      std::cout << mesh.triangle_count() << " triangles, volume " << signed_volume(mesh) << " m^3\n";
      return kOk;
    }
    if (*plan_cmd) {
      const FloorPlan plan = load_layout(layout_path);
      std::optional<TriMesh> scene;
      if (!scene_path.empty()) scene = load_mesh(scene_path);
      const CameraPlan cp = plan_cameras(plan, scene ? &*scene : nullptr, cam_cfg);
      write_text(cameras_out, named_cameras_to_jsonl(cp.cameras));
      if (!schedule_out.empty()) write_text(schedule_out, cp.schedule_json());
      std::cout << cp.cameras.size() << " cameras in " << cp.schedules.size() << " rooms\n";
      return kOk;
    }
    if (*render) {
      const TriMesh mesh = load_mesh(mesh_path);
      const auto cams = named_cameras_from_jsonl(read_text(cameras_path));
      const Camera& cam = find_camera(cams, camera_name).cam;
      const TextureAtlas atlas = atlas_dir.empty() ? TextureAtlas{} : load_atlas(atlas_dir);
      const ObjectTextures tex = load_textures(textures_dir);
      const DepthMap depth = render_depth(mesh, cam);
      if (!pfm_out.empty()) write_pfm(pfm_out, depth);
      if (mode == "depth")
        write_png(image_out, encode_depth_gray(depth, range));
      else if (mode == "condition")
        write_png(image_out, render_condition(mesh, cam, atlas, tex, range).rgb);
      else
        write_png(image_out, render_color(mesh, cam, atlas, tex, range));
      std::cout << depth.hit_count() << " of " << depth.values.size() << " pixels hit geometry\n";
      return kOk;
    }
    if (*place) {
      const FloorPlan plan = load_layout(layout_path);
      const TriMesh st = assemble_struct_mesh(plan);
      std::map<std::string, Camera> by_id;
      for (const auto& c : named_cameras_from_jsonl(read_text(cameras_path))) by_id[c.id] = c.cam;
      std::map<std::string, std::vector<ReconstructedObject>> by_room;
      for (auto& o : load_objects(objects_dir, by_id)) by_room[o.source_camera.room_id].push_back(std::move(o));
      const GeoResult geo = build_m_geo(plan, st, by_room);
      fs::create_directories(out_dir);
      write_mesh(fs::path(out_dir) / "geo.wmesh", geo.mesh);
      export_glb(geo.mesh, fs::path(out_dir) / "geo.glb");
      std::string report = "[\n";
      for (std::size_t i = 0; i < plan.rooms.size(); ++i) report += (i ? ",\n" : "") + geo.report_json(plan.rooms[i].id);
      write_text(fs::path(out_dir) / "placement.json", report + "]\n");
      for (const auto& [id, img] : geo.textures) {
        fs::create_directories(fs::path(out_dir) / "textures");
        write_png(fs::path(out_dir) / "textures" / (id + ".png"), img);
      }
      std::cout << geo.objects.size() << " objects placed, " << geo.report.size() - geo.objects.size() << " skipped\n";
      return kOk;
    }
    if (*texture) {
      const FloorPlan plan = load_layout(layout_path);
      const TriMesh mesh = load_mesh(mesh_path);
      TextureAtlas atlas = build_atlas(plan, mesh, texels);
      std::size_t written = 0, views = 0;
      for (const auto& c : named_cameras_from_jsonl(read_text(cameras_path))) {
        const fs::path img = fs::path(images_dir) / (c.id + ".png");
        if (!fs::exists(img)) continue;
        written += project_image(mesh, c.cam, read_png(img), render_depth(mesh, c.cam), c.cam.room_id, atlas, proj);
        ++views;
      }
      save_atlas(atlas, atlas_dir);
      std::cout << views << " views projected, " << written << " texel writes, coverage " << atlas.coverage() << "\n";
      return kOk;
    }
    if (*verify) {
      const TriMesh mesh = load_mesh(mesh_path);
      const auto cams = named_cameras_from_jsonl(read_text(cameras_path));
      const Camera& cam = find_camera(cams, camera_name).cam;
      const DepthMap scaffold = render_depth(mesh, cam);
      auto adapter = depth_adapter(depth_kind, depth_source, depth_constant);
      if (auto* echo = dynamic_cast<EchoDepthAdapter*>(adapter.get())) echo->set(scaffold);
      const VerificationResult r = verify_image(read_png(image_path), scaffold, *adapter, vopts);
      std::cout << nlohmann::ordered_json{{"recall", r.recall},
                                          {"threshold", r.threshold},
                                          {"pass", r.pass},
                                          {"mesh_edge_pixels", r.mesh_edge_pixels},
                                          {"matched_pixels", r.matched_pixels}}
                       .dump(2)
                << "\n";
      return r.pass ? kOk : kVerification;
    }
    if (*back) {
      const TriMesh mesh = load_mesh(mesh_path);
      std::vector<PointCloud> clouds;
      for (const auto& c : named_cameras_from_jsonl(read_text(cameras_path))) {
        std::optional<Image8> color;
        if (!images_dir.empty() && fs::exists(fs::path(images_dir) / (c.id + ".png")))
          color = read_png(fs::path(images_dir) / (c.id + ".png"));
        clouds.push_back(backproject(render_depth(mesh, c.cam), c.cam, color ? &*color : nullptr, stride, c.id));
      }
      const PointCloud merged = merge_clouds(clouds, voxel);
      write_ply(ply_out, merged);
      std::cout << merged.size() << " points\n";
      return kOk;
    }
    if (*gen) {
      RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::from_json(read_text(config_path));
      if (!gen_out.empty()) cfg.out_dir = gen_out;
      if (!theme.empty()) cfg.theme = theme;
      if (seed) cfg.seed = *seed;
      if (!layout_source.empty()) cfg.layout.source = layout_source;
      if (!layout_kind.empty()) cfg.layout.kind = layout_kind;
      if (!image_kind.empty()) cfg.image.kind = image_kind;
      if (!image_source.empty()) cfg.image.source = image_source;
      if (!gen_depth_kind.empty()) cfg.depth.kind = gen_depth_kind;
      if (!gen_depth_source.empty()) cfg.depth.source = gen_depth_source;
      if (!object_kind.empty()) cfg.objects.kind = object_kind;
      if (!object_source.empty()) cfg.objects.source = object_source;
      if (width) cfg.cameras.width = *width;
      if (height) cfg.cameras.height = *height;
      if (perimeter) cfg.cameras.perimeter_count = *perimeter;
      if (overhead) cfg.cameras.overhead_count = *overhead;
      if (max_retries) cfg.max_retries = *max_retries;
      if (cfg.theme.empty() && cfg.layout.kind == "file" && !cfg.layout.source.empty())
        cfg.theme = load_layout(cfg.layout.source).theme;
      if (print_config) {
        cfg.validate();
        std::cout << cfg.to_json();
        return kOk;
      }
      const RunManifest m = stage.empty() ? run_generate(cfg) : run_stage(cfg, stage);
      std::size_t accepted = 0, attempts = 0;
      for (const auto& v : m.views) {
        accepted += v.accepted;
        attempts += v.attempts.size();
      }
      std::cout << (stage.empty() ? std::string("generate") : "stage " + stage) << " complete: " << m.stages.size()
                << " stages, " << accepted << " images accepted in " << attempts << " attempts, manifest at "
                << (cfg.out_dir / "manifest.json").string() << "\n";
      return kOk;
    }
  } catch (const LayoutExhausted& e) {
    std::cerr << "error: " << e.what() << "\n";
    for (const auto& r : e.reports()) std::cerr << r.to_json();
    return kValidation;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
