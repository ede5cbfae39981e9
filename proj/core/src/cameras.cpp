#include "worldmesh/cameras.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "worldmesh/geom/ray.hpp"

namespace worldmesh {

using ojson = nlohmann::ordered_json;

std::string_view to_string(CameraRole r) {
  switch (r) {
    case CameraRole::kBootstrap: return "bootstrap";
    case CameraRole::kPerimeter: return "perimeter";
    case CameraRole::kOverhead: return "overhead";
  }
  return "perimeter";
}

CameraRole camera_role_from_string(std::string_view s) {
  if (s == "bootstrap") return CameraRole::kBootstrap;
  if (s == "perimeter") return CameraRole::kPerimeter;
  if (s == "overhead") return CameraRole::kOverhead;
  throw Error(ErrorCode::kSchemaError, "unknown camera role '" + std::string(s) + "'");
}

Vec2 Camera::project_camera(const Vec3& cam) const {
  const double z = -cam.z();
  return {fx * cam.x() / z + cx, cy - fy * cam.y() / z};
}

Vec3 Camera::pixel_ray(double px, double py) const {
  return (rotation() * Vec3((px - cx) / fx, (cy - py) / fy, -1.0)).normalized();
}

Vec3 Camera::unproject(double px, double py, double z) const {
  return to_world(Vec3((px - cx) / fx * z, (cy - py) / fy * z, -z));
}

void Camera::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kInvariantError, "camera: " + m); };
  if (std::abs(orientation.norm() - 1.0) > 1e-9) fail("orientation is not a unit quaternion");
  if (!(fx > 0 && fy > 0)) fail("focal lengths must be positive");
  if (width <= 0 || height <= 0) fail("image size must be positive");
  if (!(cx > 0 && cx < width && cy > 0 && cy < height)) fail("principal point outside the image");
}

bool Camera::operator==(const Camera& o) const {
  return position == o.position && orientation.coeffs() == o.orientation.coeffs() && fx == o.fx && fy == o.fy &&
         cx == o.cx && cy == o.cy && width == o.width && height == o.height && role == o.role && room_id == o.room_id;
}

void set_intrinsics(Camera& cam, int width, int height, double hfov_deg) {
  cam.width = width;
  cam.height = height;
  cam.fx = width / (2.0 * std::tan(hfov_deg * std::numbers::pi / 360.0));
  cam.fy = cam.fx;
  cam.cx = width / 2.0;
  cam.cy = height / 2.0;
}

Quat look_rotation(const Vec3& forward) {
  const Vec3 f = forward.normalized();
  Vec3 right = f.cross(Vec3::UnitZ());
  if (right.norm() < 1e-9) right = f.cross(Vec3::UnitY());  // looking straight up or down
  right.normalize();
  const Vec3 up = right.cross(f);
  Mat3 r;
  r.col(0) = right;
  r.col(1) = up;
  r.col(2) = -f;
  Quat q(r);
  q.normalize();
  if (q.w() < 0) q.coeffs() *= -1.0;
  return q;
}

Quat aim_at(const Vec3& eye, const Vec2& target, double pitch) {
  Vec2 h = target - eye.head<2>();
  if (h.norm() < 1e-12) h = Vec2(1, 0);
  h.normalize();
  return look_rotation(Vec3(std::cos(pitch) * h.x(), std::cos(pitch) * h.y(), -std::sin(pitch)));
}

namespace {

Camera make_camera(const Room& room, const Vec3& pos, CameraRole role, double pitch, const CameraConfig& cfg) {
  Camera c;
  c.position = pos;
  c.orientation = aim_at(pos, room.floor.centroid(), pitch);
  set_intrinsics(c, cfg.width, cfg.height, cfg.hfov_deg);
  c.role = role;
  c.room_id = room.id;
  return c;
}

std::vector<Camera> ring(const Room& room, double wall_thickness, int count, double z, CameraRole role, double pitch,
                         const CameraConfig& cfg) {
  Polygon2D path = inset_polygon(room.floor, wall_thickness + cfg.wall_offset);
  const double perimeter = path.perimeter();
  const int n = std::min(count, static_cast<int>(std::floor(perimeter / cfg.min_spacing)));
  if (n < 1) throw Error(ErrorCode::kInsetCollapse, "room '" + room.id + "' too small for perimeter cameras");
  std::vector<Camera> out;
  const double step = perimeter / n;
  for (int k = 0; k < n; ++k) {
    Vec2 p = path.point_at_arc_length((k + 0.5) * step);
    out.push_back(make_camera(room, Vec3(p.x(), p.y(), z), role, pitch, cfg));
  }
  return out;
}

}  // namespace

std::array<Camera, 2> bootstrap_cameras(const Room& room, double wall_thickness, const CameraConfig& cfg) {
  Rect2 rect = min_area_rect(room.floor.vertices());
  // Shorter pair of opposite sides; exact ties keep sides 0 and 2.
  const int first = rect.side_length(1) < rect.side_length(0) - 1e-9 ? 1 : 0;
  std::array<Camera, 2> out;
  for (int k = 0; k < 2; ++k) {
    const int side = first + 2 * k;
    Vec2 mid = rect.side_midpoint(side);
    Vec2 in = (rect.center - mid).normalized();
    Vec2 p = mid + in * (wall_thickness + cfg.wall_offset);
    out[static_cast<std::size_t>(k)] =
        make_camera(room, Vec3(p.x(), p.y(), cfg.eye_height), CameraRole::kBootstrap, 0.0, cfg);
  }
  return out;
}

std::vector<Camera> perimeter_cameras(const Room& room, double wall_thickness, const CameraConfig& cfg) {
  return ring(room, wall_thickness, cfg.perimeter_count, cfg.eye_height, CameraRole::kPerimeter, 0.0, cfg);
}

std::vector<Camera> overhead_cameras(const Room& room, double wall_thickness, const CameraConfig& cfg) {
  return ring(room, wall_thickness, cfg.overhead_count, cfg.overhead_height_fraction * room.ceiling_height,
              CameraRole::kOverhead, cfg.overhead_pitch_deg * std::numbers::pi / 180.0, cfg);
}

std::vector<Camera> room_cameras(const Room& room, double wall_thickness, const CameraConfig& cfg) {
  auto boot = bootstrap_cameras(room, wall_thickness, cfg);
  std::vector<Camera> out(boot.begin(), boot.end());
  for (auto& c : perimeter_cameras(room, wall_thickness, cfg)) out.push_back(std::move(c));
  for (auto& c : overhead_cameras(room, wall_thickness, cfg)) out.push_back(std::move(c));
  return out;
}

Camera nudge_away_from_objects(const Camera& cam, const TriMesh& scene, double clearance, const Vec2& aim,
                               const Polygon2D* region) {
  const TriMesh objects = filter_faces(scene, [&](std::size_t f) { return scene.tag_of(f).category == Category::kObject; });
  const TriMesh walls = filter_faces(scene, [&](std::size_t f) { return scene.tag_of(f).category == Category::kWall; });
  auto obj_dist = [&](const Vec3& p) {
    auto c = closest_point(objects, p);
    return c ? c->distance : std::numeric_limits<double>::infinity();
  };
  auto nearest = closest_point(objects, cam.position);
  if (!nearest || nearest->distance >= clearance) return cam;

  Vec2 dir = cam.position.head<2>() - nearest->point.head<2>();
  if (dir.norm() < 1e-9) {
    // Nearest point straight above or below: push away from the object's center.
    Vec3 c = bounds(objects).center();
    dir = cam.position.head<2>() - c.head<2>();
    if (dir.norm() < 1e-9) dir = aim - cam.position.head<2>();
    if (dir.norm() < 1e-9) dir = Vec2(1, 0);
  }
  dir.normalize();
  const Vec3 d3(dir.x(), dir.y(), 0.0);
  // The wall ahead bounds the search; walls beside the path do not.
  double limit = 50.0;
  if (auto hit = raycast(walls, cam.position, d3)) limit = hit->t - clearance;

  constexpr double kStep = 0.01;
  for (double s = 0.0; s <= limit; s += kStep) {
    Vec3 p = cam.position + d3 * s;
    if (region && !region->contains(p.head<2>())) break;
    if (obj_dist(p) >= clearance) {
      Camera out = cam;
      out.position = p;
      const double pitch = std::asin(std::clamp(-cam.forward().z(), -1.0, 1.0));
      out.orientation = aim_at(p, aim, pitch);
      return out;
    }
  }
  throw Error(ErrorCode::kNoFreeSpace, "no position with " + std::to_string(clearance) +
                                           " m clearance between the objects and the wall");
}

double quat_similarity(const Quat& q1, const Quat& q2) {
  const double n1 = q1.norm(), n2 = q2.norm();
  if (n1 < 1e-12 || n2 < 1e-12) throw Error(ErrorCode::kZeroQuaternion, "cannot normalize a zero quaternion");
  const double d = std::abs(q1.coeffs().dot(q2.coeffs())) / (n1 * n2);
  return std::min(d, 1.0);
}

SynthesisSchedule schedule_synthesis(const std::vector<Camera>& cameras, std::array<int, 2> bootstrap) {
  const int n = static_cast<int>(cameras.size());
  for (int b : bootstrap)
    if (b < 0 || b >= n) throw Error(ErrorCode::kInvalidArgument, "bootstrap index out of range");
  if (bootstrap[0] == bootstrap[1]) throw Error(ErrorCode::kInvalidArgument, "bootstrap indices must differ");
  SynthesisSchedule s;
  s.order = {bootstrap[0], bootstrap[1]};
  s.style_ref = {-1, 0};
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  used[static_cast<std::size_t>(bootstrap[0])] = used[static_cast<std::size_t>(bootstrap[1])] = true;
  // best[c]: highest similarity of camera c to any scheduled camera and where.
  std::vector<double> best(static_cast<std::size_t>(n), -1.0);
  std::vector<int> best_pos(static_cast<std::size_t>(n), -1);
  auto absorb = [&](int pos) {
    const Quat& q = cameras[static_cast<std::size_t>(s.order[static_cast<std::size_t>(pos)])].orientation;
    for (int c = 0; c < n; ++c) {
      if (used[static_cast<std::size_t>(c)]) continue;
      double v = quat_similarity(cameras[static_cast<std::size_t>(c)].orientation, q);
      if (v > best[static_cast<std::size_t>(c)]) {
        best[static_cast<std::size_t>(c)] = v;
        best_pos[static_cast<std::size_t>(c)] = pos;
      }
    }
  };
  absorb(0);
  absorb(1);
  while (static_cast<int>(s.order.size()) < n) {
    int pick = -1;
    for (int c = 0; c < n; ++c)
      if (!used[static_cast<std::size_t>(c)] && (pick < 0 || best[static_cast<std::size_t>(c)] > best[static_cast<std::size_t>(pick)]))
        pick = c;
    used[static_cast<std::size_t>(pick)] = true;
    s.order.push_back(pick);
    s.style_ref.push_back(best_pos[static_cast<std::size_t>(pick)]);
    absorb(static_cast<int>(s.order.size()) - 1);
  }
  return s;
}

std::string camera_to_json(const Camera& c) {
  ojson j;
  j["room"] = c.room_id;
  j["role"] = to_string(c.role);
  j["position"] = {c.position.x(), c.position.y(), c.position.z()};
  j["quat_wxyz"] = {c.orientation.w(), c.orientation.x(), c.orientation.y(), c.orientation.z()};
  j["fx"] = c.fx;
  j["fy"] = c.fy;
  j["cx"] = c.cx;
  j["cy"] = c.cy;
  j["W"] = c.width;
  j["H"] = c.height;
  return j.dump();
}

Camera camera_from_json(std::string_view line) {
  try {
    auto j = nlohmann::json::parse(line);
    Camera c;
    c.room_id = j.at("room").get<std::string>();
    c.role = camera_role_from_string(j.at("role").get<std::string>());
    const auto& p = j.at("position");
    c.position = Vec3(p.at(0), p.at(1), p.at(2));
    const auto& q = j.at("quat_wxyz");
    c.orientation = Quat(q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>(), q.at(3).get<double>());
    c.fx = j.at("fx");
    c.fy = j.at("fy");
    c.cx = j.at("cx");
    c.cy = j.at("cy");
    c.width = j.at("W");
    c.height = j.at("H");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("camera record: ") + e.what());
  }
}

std::string cameras_to_jsonl(const std::vector<Camera>& cams) {
  std::string out;
  for (const auto& c : cams) out += camera_to_json(c) + "\n";
  return out;
}

std::vector<Camera> cameras_from_jsonl(std::string_view text) {
  std::vector<Camera> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line))
    if (line.find_first_not_of(" \t\r") != std::string::npos) out.push_back(camera_from_json(line));
  return out;
}

}  // namespace worldmesh
