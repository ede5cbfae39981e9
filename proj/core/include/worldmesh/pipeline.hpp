#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "worldmesh/cameras.hpp"
#include "worldmesh/floorplan.hpp"
#include "worldmesh/image.hpp"
#include "worldmesh/objects.hpp"
#include "worldmesh/recon.hpp"
#include "worldmesh/render.hpp"
#include "worldmesh/structmesh.hpp"
#include "worldmesh/texproj.hpp"
#include "worldmesh/verify.hpp"

namespace worldmesh {

inline constexpr const char* kImageEndpointEnv = "WORLDMESH_IMAGE_ENDPOINT";
inline constexpr const char* kDepthEndpointEnv = "WORLDMESH_DEPTH_ENDPOINT";
inline constexpr const char* kLayoutEndpointEnv = "WORLDMESH_LAYOUT_ENDPOINT";
inline constexpr const char* kObjectEndpointEnv = "WORLDMESH_OBJECT_ENDPOINT";

// Adapter selections. `source` is a path, shell command or URL depending on
// the kind; an empty source for http/command kinds falls back to the
// matching WORLDMESH_*_ENDPOINT variable.
struct LayoutSourceConfig {
  std::string kind = "file";  // file | directory | command | http
  std::string source;
  int max_attempts = 5;
};

struct ImageSourceConfig {
  std::string kind = "mock";  // mock | dir | command | http
  std::string source;
  int timeout_seconds = 600;
};

struct DepthSourceConfig {
  std::string kind = "echo";  // echo | constant | stored | command | http
  std::string source;
  double constant = 3.0;
};

struct ObjectSourceConfig {
  std::string kind = "mock";  // none | mock | dir | command
  std::string source;
};

struct RunConfig {
  std::string theme;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;  // not part of the serialized config

  LayoutSourceConfig layout;
  ImageSourceConfig image;
  DepthSourceConfig depth;
  ObjectSourceConfig objects;

  CameraConfig cameras;
  StructOptions structure;
  double texels_per_meter = kDefaultTexelDensity;
  ProjectOptions projection;
  DepthRange depth_range;
  VerifyOptions verify;
  int max_retries = 4;  // total generation attempts per view
  int stride = kDefaultStride;
  double voxel = kDefaultVoxel;
  LossWeights loss;

  // Throws Error{kInvalidArgument} naming the first out-of-range parameter.
  void validate() const;
  std::string to_json() const;
  // Missing keys keep their defaults. Throws Error{kSchemaError}.
  static RunConfig from_json(std::string_view text);
};

struct ImageRequest {
  Image8 condition;
  std::optional<Image8> style;
  std::string prompt;
  std::uint64_t seed = 0;
  std::string view_id;
};

// External image generator. Implementations throw Error{kAdapterFailure}.
class ImageAdapter {
 public:
  virtual ~ImageAdapter() = default;
  virtual Image8 generate(const ImageRequest& request) = 0;
};

// Deterministic stand-in: the condition image pulled towards the style
// image's mean color (or a theme color) with a seed-dependent offset.
class MockImageAdapter : public ImageAdapter {
 public:
  explicit MockImageAdapter(std::string theme) : theme_(std::move(theme)) {}
  Image8 generate(const ImageRequest& request) override;

 private:
  std::string theme_;
};

// Writes <dir>/<view>/{condition.png, style.png, prompt.txt, request.json} and
// waits for <dir>/<view>/image.png. Slashes in view ids become "__".
class DirectoryImageAdapter : public ImageAdapter {
 public:
  DirectoryImageAdapter(std::filesystem::path dir, int timeout_seconds)
      : dir_(std::move(dir)), timeout_seconds_(timeout_seconds) {}
  Image8 generate(const ImageRequest& request) override;

 private:
  std::filesystem::path dir_;
  int timeout_seconds_;
};

// JSON {condition_png, style_png, prompt, seed, view_id} (PNGs base64) in,
// JSON {image_png} out.
std::string image_request_json(const ImageRequest& request);
Image8 image_response(const std::string& body);

class CommandImageAdapter : public ImageAdapter {
 public:
  explicit CommandImageAdapter(std::string command) : command_(std::move(command)) {}
  Image8 generate(const ImageRequest& request) override;

 private:
  std::string command_;
};

class HttpImageAdapter : public ImageAdapter {
 public:
  HttpImageAdapter(std::string url, int timeout_seconds) : url_(std::move(url)), timeout_seconds_(timeout_seconds) {}
  Image8 generate(const ImageRequest& request) override;

 private:
  std::string url_;
  int timeout_seconds_;
};

// Segmentation plus single-image reconstruction behind an adapter: turns the
// object source image of one room into canonical meshes with poses relative to
// `camera`.
class ObjectProvider {
 public:
  virtual ~ObjectProvider() = default;
  virtual std::vector<ReconstructedObject> reconstruct(const Room& room, const Camera& camera, const Image8& image,
                                                       const std::string& prompt) = 0;
};

// A table in front of the camera and a painting to its right, textured.
class MockObjectProvider : public ObjectProvider {
 public:
  std::vector<ReconstructedObject> reconstruct(const Room& room, const Camera& camera, const Image8& image,
                                               const std::string& prompt) override;
};

// load_objects(<dir>/<room id>) with the camera registered as "object" and
// "<room id>/object".
class DirectoryObjectProvider : public ObjectProvider {
 public:
  explicit DirectoryObjectProvider(std::filesystem::path dir) : dir_(std::move(dir)) {}
  std::vector<ReconstructedObject> reconstruct(const Room& room, const Camera& camera, const Image8& image,
                                               const std::string& prompt) override;

 private:
  std::filesystem::path dir_;
};

// Runs the command with {room, prompt, image_png, out_dir} on stdin; the
// command writes an object manifest and GLBs into out_dir.
class CommandObjectProvider : public ObjectProvider {
 public:
  CommandObjectProvider(std::string command, std::filesystem::path work_dir)
      : command_(std::move(command)), work_dir_(std::move(work_dir)) {}
  std::vector<ReconstructedObject> reconstruct(const Room& room, const Camera& camera, const Image8& image,
                                               const std::string& prompt) override;

 private:
  std::string command_;
  std::filesystem::path work_dir_;
};

std::unique_ptr<LayoutProvider> make_layout_provider(const RunConfig& config);
std::unique_ptr<ImageAdapter> make_image_adapter(const RunConfig& config);
std::unique_ptr<DepthAdapter> make_depth_adapter(const RunConfig& config);
// nullptr for kind "none".
std::unique_ptr<ObjectProvider> make_object_provider(const RunConfig& config);

// The shipped iterative prompt with {theme} substituted.
std::string synthesis_prompt(const std::string& theme);
std::string object_prompt(const Room& room, const std::string& theme);

// "<room>/c<NN>" with the camera's index in room_cameras order.
std::string camera_id(const std::string& room_id, int index);

struct NamedCamera {
  std::string id;
  Camera cam;
};

// Camera records with a leading "id" field. Lines without one are named
// camera_id(room, k) with k counting that room's earlier lines.
std::string named_cameras_to_jsonl(const std::vector<NamedCamera>& cams);
std::vector<NamedCamera> named_cameras_from_jsonl(std::string_view text);

struct AttemptRecord {
  std::uint64_t seed = 0;
  VerificationResult result;
};

struct ViewRecord {
  std::string stage;
  std::string room;
  std::string camera_id;
  int position = 0;            // position in the room's schedule
  std::string style_ref;       // camera id of the style image, empty for none
  std::vector<AttemptRecord> attempts;
  bool accepted = false;
  std::string image;           // path relative to the run directory
  std::string image_sha256;
  std::size_t texels_written = 0;
};

struct StageRecord {
  std::string name;
  std::map<std::string, std::string> artifacts;  // relative path -> SHA-256
};

struct RoomSchedule {
  std::string room;
  std::vector<std::string> order;  // camera ids
  std::vector<int> style_ref;      // positions in `order`, -1 for the first
};

struct CameraPlan {
  std::vector<NamedCamera> cameras;  // rooms in plan order
  std::vector<RoomSchedule> schedules;
  std::string nudge_json;  // per camera: unchanged, moved or dropped

  std::string schedule_json() const;
};

// room_cameras for every room, nudged off the objects of `scene` (when given)
// within the room's inner outline, then scheduled from the bootstrap pair.
// Non-bootstrap cameras without free space are dropped; a bootstrap camera
// without free space throws Error{kNoFreeSpace}.
CameraPlan plan_cameras(const FloorPlan& plan, const TriMesh* scene, const CameraConfig& cfg);

struct RunManifest {
  std::string config_json;
  std::vector<StageRecord> stages;
  std::vector<RoomSchedule> schedules;
  std::vector<ViewRecord> views;
  std::string failed_stage;
  std::string failure;

  const StageRecord* stage(std::string_view name) const;
  std::string to_json() const;
  static RunManifest from_json(std::string_view text);
};

const std::vector<std::string>& stage_names();

// Executes one stage against the artifacts of earlier stages in
// config.out_dir and updates <out_dir>/manifest.json. Throws
// Error{kMissingPriorArtifact}; on other failures the manifest records the
// failing stage before the error propagates.
RunManifest run_stage(const RunConfig& config, std::string_view stage);
// All stages in order.
RunManifest run_generate(const RunConfig& config);

}  // namespace worldmesh
