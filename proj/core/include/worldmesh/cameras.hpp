#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "worldmesh/floorplan.hpp"
#include "worldmesh/geom/mesh.hpp"

namespace worldmesh {

enum class CameraRole { kBootstrap, kPerimeter, kOverhead };
std::string_view to_string(CameraRole r);
CameraRole camera_role_from_string(std::string_view s);

// Pinhole camera. orientation is world-from-camera (scalar-first when
// serialized); the camera looks along its local -z with +y up and +x right.
// Pixel (p_x, p_y) has its origin at the top-left image corner; pixel (i, j)
// covers [i, i+1) x [j, j+1).
struct Camera {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
  double fx = 1, fy = 1, cx = 0.5, cy = 0.5;
  int width = 1, height = 1;
  CameraRole role = CameraRole::kPerimeter;
  std::string room_id;

  Mat3 rotation() const { return orientation.toRotationMatrix(); }
  Vec3 forward() const { return rotation() * Vec3(0, 0, -1); }
  Vec3 to_camera(const Vec3& world) const { return rotation().transpose() * (world - position); }
  Vec3 to_world(const Vec3& cam) const { return rotation() * cam + position; }
  // Depth along the view axis (positive in front).
  double depth_of(const Vec3& world) const { return -to_camera(world).z(); }
  // Pixel coordinates of a camera-space point with depth > 0.
  Vec2 project_camera(const Vec3& cam) const;
  // Unit world-space direction through pixel coordinates (p_x, p_y).
  Vec3 pixel_ray(double px, double py) const;
  // World point at pixel (p_x, p_y) and depth z.
  Vec3 unproject(double px, double py, double z) const;

  void validate() const;  // throws Error{kInvariantError}
  bool operator==(const Camera& o) const;
};

struct CameraConfig {
  int width = 1376;
  int height = 768;
  double hfov_deg = 60.0;
  double object_hfov_deg = 90.0;
  double eye_height = 1.6;
  double wall_offset = 0.3;
  int perimeter_count = 16;
  int overhead_count = 8;
  double overhead_height_fraction = 0.85;
  double overhead_pitch_deg = 25.0;
  double min_spacing = 0.5;
  double clearance = 0.4;
};

// fx = W / (2 tan(hfov/2)), fy = fx, principal point at the image center.
void set_intrinsics(Camera& cam, int width, int height, double hfov_deg);
// World-from-camera rotation whose -z axis is `forward` and whose +y axis is as
// close to world +z as possible.
Quat look_rotation(const Vec3& forward);
// Horizontal direction towards `target`, pitched down by `pitch` radians.
Quat aim_at(const Vec3& eye, const Vec2& target, double pitch);

std::array<Camera, 2> bootstrap_cameras(const Room& room, double wall_thickness, const CameraConfig& cfg = {});
std::vector<Camera> perimeter_cameras(const Room& room, double wall_thickness, const CameraConfig& cfg = {});
std::vector<Camera> overhead_cameras(const Room& room, double wall_thickness, const CameraConfig& cfg = {});

// bootstrap pair, then perimeter, then overhead cameras.
std::vector<Camera> room_cameras(const Room& room, double wall_thickness, const CameraConfig& cfg = {});

// Moves the camera horizontally away from the nearest object point until it is
// at least `clearance` from every object face, stopping `clearance` short of
// the wall ahead, then re-aims at `aim` keeping its pitch. Positions outside `region` (when given) are not
// considered. Throws Error{kNoFreeSpace}.
Camera nudge_away_from_objects(const Camera& cam, const TriMesh& scene, double clearance, const Vec2& aim,
                               const Polygon2D* region = nullptr);

// |q1 . q2| of the normalized quaternions. Throws Error{kZeroQuaternion}.
double quat_similarity(const Quat& q1, const Quat& q2);

struct SynthesisSchedule {
  std::vector<int> order;      // camera indices, generation order
  std::vector<int> style_ref;  // style_ref[i] < i is a position in `order`; -1 for i = 0
};

SynthesisSchedule schedule_synthesis(const std::vector<Camera>& cameras, std::array<int, 2> bootstrap);

std::string camera_to_json(const Camera& cam);
Camera camera_from_json(std::string_view line);
std::string cameras_to_jsonl(const std::vector<Camera>& cams);
std::vector<Camera> cameras_from_jsonl(std::string_view text);

}  // namespace worldmesh
