#include "worldmesh/objects.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "worldmesh/geom/ray.hpp"
#include "worldmesh/glb.hpp"
#include "worldmesh/resources.hpp"
#include "worldmesh/structmesh.hpp"

namespace worldmesh {

namespace {

constexpr double kOverlapTol = 1e-3;  // m², pairs below this count as separated
constexpr int kMaxConflictIterations = 32;
constexpr int kFootprintRays = 9;

std::string normalize_label(std::string_view label) {
  std::string out;
  for (char c : label) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  const auto b = out.find_first_not_of(" \t"), e = out.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : out.substr(b, e - b + 1);
}

void retag(TriMesh& mesh, const FaceTag& tag) {
  mesh.tags = {tag};
  std::fill(mesh.face_tag.begin(), mesh.face_tag.end(), 0u);
}

double footprint_area(const TriMesh& m) {
  const Aabb3 b = bounds(m);
  return std::max(0.0, b.size().x()) * std::max(0.0, b.size().y());
}

}  // namespace

std::string_view to_string(Placement p) {
  switch (p) {
    case Placement::kFloorStanding: return "floor_standing";
    case Placement::kFlat: return "flat";
    case Placement::kWallMounted: return "wall_mounted";
    case Placement::kCeilingHung: return "ceiling_hung";
  }
  return "floor_standing";
}

Placement placement_from_string(std::string_view s) {
  for (Placement p : {Placement::kFloorStanding, Placement::kFlat, Placement::kWallMounted, Placement::kCeilingHung})
    if (to_string(p) == s) return p;
  throw Error(ErrorCode::kSchemaError, "unknown placement class '" + std::string(s) + "'");
}

PlacementTable PlacementTable::parse(std::string_view text) {
  PlacementTable t;
  try {
    auto j = nlohmann::json::parse(text);
    t.flat_aspect_ratio = j.value("flat_aspect_ratio", t.flat_aspect_ratio);
    t.flat_axis_min_z = j.value("flat_axis_min_z", t.flat_axis_min_z);
    t.default_mount_height = j.value("default_mount_height", t.default_mount_height);
    for (const auto& [label, e] : j.at("labels").items()) {
      Entry entry;
      entry.placement = placement_from_string(e.at("placement").get<std::string>());
      if (e.contains("mount_height")) entry.mount_height = e.at("mount_height").get<double>();
      t.labels[normalize_label(label)] = entry;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("bad placement table: ") + e.what());
  }
  return t;
}

PlacementTable PlacementTable::defaults() {
  static const PlacementTable table = parse(resources::placement_labels());
  return table;
}

double PlacementTable::mount_height(const std::string& label) const {
  auto it = labels.find(normalize_label(label));
  return it != labels.end() && it->second.mount_height ? *it->second.mount_height : default_mount_height;
}

TriMesh to_world(const ReconstructedObject& obj) {
  TriMesh out = obj.mesh;
  const Mat3 r = obj.pose.rotation.normalized().toRotationMatrix();
  for (Vec3& v : out.vertices) v = obj.source_camera.to_world(r * v + obj.pose.translation);
  return out;
}

Placement classify_placement(const std::string& label, const Obb& obb, const PlacementTable& table) {
  auto it = table.labels.find(normalize_label(label));
  if (it != table.labels.end()) return it->second.placement;
  int lo = 0, hi = 0;
  for (int i = 1; i < 3; ++i) {
    if (obb.half_extents[i] < obb.half_extents[lo]) lo = i;
    if (obb.half_extents[i] > obb.half_extents[hi]) hi = i;
  }
  if (obb.half_extents[hi] > 0 && obb.half_extents[lo] / obb.half_extents[hi] < table.flat_aspect_ratio &&
      std::abs(obb.axis(lo).z()) >= table.flat_axis_min_z)
    return Placement::kFlat;
  return Placement::kFloorStanding;
}

TriMesh level_to_ground(const TriMesh& mesh) {
  const Obb obb = oriented_bounding_box(mesh);
  if (!obb.axes.allFinite() || !obb.center.allFinite() || !(obb.half_extents.maxCoeff() > 1e-9))
    throw Error(ErrorCode::kDegenerateObb, "object has a degenerate bounding box");
  const auto normals = obb.face_normals();
  std::size_t best = 0;
  for (std::size_t i = 1; i < normals.size(); ++i)
    if (normals[i].z() < normals[best].z()) best = i;
  const Quat q = Quat::FromTwoVectors(normals[best], -Vec3::UnitZ());
  if (Eigen::AngleAxisd(q).angle() < 1e-12) return mesh;
  const Mat3 r = q.toRotationMatrix();
  TriMesh out = mesh;
  for (Vec3& v : out.vertices) v = obb.center + r * (v - obb.center);
  return out;
}

double footprint_overlap(const TriMesh& a, const TriMesh& b) {
  const Aabb3 ba = bounds(a), bb = bounds(b);
  const double ox = std::min(ba.max.x(), bb.max.x()) - std::max(ba.min.x(), bb.min.x());
  const double oy = std::min(ba.max.y(), bb.max.y()) - std::max(ba.min.y(), bb.min.y());
  return ox > 0 && oy > 0 ? ox * oy : 0.0;
}

SupportResult drop_to_support(const TriMesh& mesh, const TriMesh& scene, SupportDirection dir,
                              const std::vector<PlacedObject>& placed) {
  const bool down = dir == SupportDirection::kDown;
  TriMesh supports = filter_faces(scene, [&](std::size_t f) {
    const FaceTag& t = scene.tag_of(f);
    const double nz = scene.face_normal(f).z();
    return down ? (t.category == Category::kFloor && nz > 0.5) : (t.category == Category::kCeiling && nz < -0.5);
  });
  if (down) {
    const double own = footprint_area(mesh);
    for (const PlacedObject& p : placed) {
      const double smaller = std::min(own, footprint_area(p.mesh));
      if (smaller <= 0 || footprint_overlap(mesh, p.mesh) < kStackOverlapFraction * smaller) continue;
      TriMesh top = filter_faces(p.mesh, [&](std::size_t f) { return p.mesh.face_normal(f).z() > 0.5; });
      retag(top, FaceTag{p.room_id, Category::kObject, p.id});
      supports.append(top);
    }
  }
  const Aabb3 b = bounds(mesh);
  RayCaster caster(supports);
  auto probe = [&](double z0) {
    std::optional<std::pair<double, std::size_t>> best;
    for (int j = 0; j < kFootprintRays; ++j)
      for (int i = 0; i < kFootprintRays; ++i) {
        const Vec3 o(b.min.x() + (i + 0.5) / kFootprintRays * b.size().x(),
                     b.min.y() + (j + 0.5) / kFootprintRays * b.size().y(), z0);
        auto hit = caster.cast(o, Vec3(0, 0, down ? -1.0 : 1.0));
        if (!hit) continue;
        const double z = down ? z0 - hit->t : z0 + hit->t;
        if (!best || (down ? z > best->first : z < best->first)) best = std::make_pair(z, hit->face);
      }
    return best;
  };
  auto best = probe(down ? b.max.z() : b.min.z());
  if (!best) best = probe(down ? b.max.z() + 100.0 : b.min.z() - 100.0);  // object sunk past its support
  if (!best) throw Error(ErrorCode::kNoSupportFound, down ? "no support surface below object" : "no ceiling above object");
  const FaceTag& tag = supports.tag_of(best->second);
  SupportResult out{translated(mesh, Vec3(0, 0, best->first - (down ? b.min.z() : b.max.z()))),
                    tag.object_id.empty() ? std::string(to_string(tag.category)) : tag.object_id};
  return out;
}

SupportResult attach_to_wall(const TriMesh& mesh, const FloorPlan& plan, int room_index, double mount_height) {
  const auto runs = wall_runs(plan);
  const Aabb3 b = bounds(mesh);
  const Vec2 c = b.center().head<2>();
  int best = -1, k = 0, best_k = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const WallRun& r = runs[i];
    if (r.room != room_index) continue;
    const Vec2 d = r.inner_end - r.inner_start;
    const double s = std::clamp((c - r.inner_start).dot(d) / d.squaredNorm(), 0.0, 1.0);
    const double dist = (c - (r.inner_start + s * d)).norm();
    if (dist < best_d) {
      best_d = dist;
      best = static_cast<int>(i);
      best_k = k;
    }
    ++k;
  }
  if (best < 0) throw Error(ErrorCode::kNoWallFound, "room has no walls");
  const WallRun& r = runs[static_cast<std::size_t>(best)];
  double back = std::numeric_limits<double>::infinity();
  for (const Vec3& v : mesh.vertices) back = std::min(back, (v.head<2>() - r.inner_start).dot(r.inward));
  const Vec2 shift = -back * r.inward;
  SupportResult out{translated(mesh, Vec3(shift.x(), shift.y(), mount_height - b.center().z())),
                    plan.rooms[static_cast<std::size_t>(room_index)].id + "/wall/" + std::to_string(best_k)};
  return out;
}

ConflictReport resolve_conflicts(std::vector<PlacedObject>& objects, const FloorPlan& plan, int room_index) {
  ConflictReport report;
  const std::string& room_id = plan.rooms[static_cast<std::size_t>(room_index)].id;
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < objects.size(); ++i)
    if (objects[i].room_id == room_id && objects[i].placement == Placement::kFloorStanding && objects[i].support == "floor")
      order.push_back(i);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return footprint_area(objects[a].mesh) > footprint_area(objects[b].mesh);
  });
  const auto runs = wall_runs(plan);
  const Polygon2D outline = inner_outline(runs, room_index);

  auto total_overlap = [&] {
    double t = 0;
    for (std::size_t a = 0; a < order.size(); ++a)
      for (std::size_t b = a + 1; b < order.size(); ++b) t += footprint_overlap(objects[order[a]].mesh, objects[order[b]].mesh);
    return t;
  };
  auto inside = [&](const Aabb3& box, const Vec2& shift) {
    for (const Vec2& q : {Vec2(box.min.x(), box.min.y()), Vec2(box.max.x(), box.min.y()), Vec2(box.max.x(), box.max.y()),
                          Vec2(box.min.x(), box.max.y())})
      if (!outline.contains(q + shift)) return false;
    return true;
  };

  for (report.iterations = 0; report.iterations < kMaxConflictIterations; ++report.iterations) {
    bool moved = false;
    for (std::size_t a = 0; a < order.size(); ++a)
      for (std::size_t b = a + 1; b < order.size(); ++b) {
        PlacedObject& big = objects[order[a]];
        PlacedObject& small = objects[order[b]];
        if (footprint_overlap(big.mesh, small.mesh) <= kOverlapTol) continue;
        const Aabb3 ba = bounds(big.mesh), bs = bounds(small.mesh);
        Vec2 d = bs.center().head<2>() - ba.center().head<2>();
        if (d.norm() < 1e-9) {
          // Coincident centers: head for the nearest wall.
          double best = std::numeric_limits<double>::infinity();
          for (const WallRun& r : runs) {
            if (r.room != room_index) continue;
            const double dist = (bs.center().head<2>() - r.inner_start).dot(r.inward);
            if (dist < best) {
              best = dist;
              d = -r.inward;
            }
          }
        }
        d.normalize();
        const double ox = std::min(ba.max.x(), bs.max.x()) - std::max(ba.min.x(), bs.min.x());
        const double oy = std::min(ba.max.y(), bs.max.y()) - std::max(ba.min.y(), bs.min.y());
        const double tx = std::abs(d.x()) > 1e-12 ? ox / std::abs(d.x()) : std::numeric_limits<double>::infinity();
        const double ty = std::abs(d.y()) > 1e-12 ? oy / std::abs(d.y()) : std::numeric_limits<double>::infinity();
        double t = std::min(tx, ty);
        if (!std::isfinite(t)) continue;
        if (!inside(bs, d * t)) {
          if (!inside(bs, Vec2::Zero())) continue;
          double lo = 0, hi = t;
          for (int it = 0; it < 48; ++it) {
            const double mid = 0.5 * (lo + hi);
            (inside(bs, d * mid) ? lo : hi) = mid;
          }
          t = lo;
        }
        if (t <= 1e-9) continue;
        const double before = total_overlap();
        const TriMesh saved = small.mesh;
        small.mesh = translated(small.mesh, Vec3(d.x() * t, d.y() * t, 0));
        if (total_overlap() > before + 1e-12) {
          small.mesh = saved;
          continue;
        }
        moved = true;
      }
    if (!moved) break;
  }
  for (std::size_t a = 0; a < order.size(); ++a)
    for (std::size_t b = a + 1; b < order.size(); ++b)
      if (footprint_overlap(objects[order[a]].mesh, objects[order[b]].mesh) > kOverlapTol) {
        objects[order[a]].unresolved_overlap = objects[order[b]].unresolved_overlap = true;
        report.unresolved.emplace_back(objects[order[a]].id, objects[order[b]].id);
      }
  return report;
}

std::string GeoResult::report_json(const std::string& room_id) const {
  nlohmann::ordered_json j;
  j["room"] = room_id;
  j["objects"] = nlohmann::ordered_json::array();
  for (const PlacementEntry& e : report) {
    if (e.room_id != room_id) continue;
    nlohmann::ordered_json o{{"object_id", e.object_id}, {"label", e.label}, {"status", e.status}};
    if (e.status == "placed") {
      o["placement"] = e.placement;
      o["support"] = e.support;
      auto it = std::find_if(objects.begin(), objects.end(), [&](const PlacedObject& p) { return p.id == e.object_id; });
      o["overlap_unresolved"] = it != objects.end() && it->unresolved_overlap;
    } else {
      o["error"] = e.error;
    }
    j["objects"].push_back(std::move(o));
  }
  return j.dump(2) + "\n";
}

GeoResult build_m_geo(const FloorPlan& plan, const TriMesh& struct_mesh,
                      const std::map<std::string, std::vector<ReconstructedObject>>& objects_by_room,
                      const PlacementTable& table) {
  GeoResult out;
  out.mesh = struct_mesh;
  for (std::size_t r = 0; r < plan.rooms.size(); ++r) {
    const Room& room = plan.rooms[r];
    auto it = objects_by_room.find(room.id);
    if (it == objects_by_room.end()) continue;
    std::vector<PlacedObject> placed;
    std::vector<std::size_t> entries;
    for (const ReconstructedObject& obj : it->second) {
      PlacementEntry entry{obj.id, obj.label, room.id, "placed", {}, {}, {}};
      try {
        TriMesh world = to_world(obj);
        const Placement cls = classify_placement(obj.label, oriented_bounding_box(world), table);
        TriMesh level = level_to_ground(world);
        SupportResult res;
        switch (cls) {
          case Placement::kFloorStanding:
          case Placement::kFlat: res = drop_to_support(level, struct_mesh, SupportDirection::kDown, placed); break;
          case Placement::kCeilingHung: res = drop_to_support(level, struct_mesh, SupportDirection::kUp); break;
          case Placement::kWallMounted:
            res = attach_to_wall(level, plan, static_cast<int>(r), table.mount_height(obj.label));
            break;
        }
        retag(res.mesh, FaceTag{room.id, Category::kObject, obj.id});
        placed.push_back(PlacedObject{obj.id, obj.label, room.id, cls, res.support, std::move(res.mesh), false});
        if (obj.texture) out.textures[obj.id] = *obj.texture;
        entry.placement = std::string(to_string(cls));
        entry.support = placed.back().support;
      } catch (const Error& e) {
        entry.status = "skipped";
        entry.error = e.what();
      }
      out.report.push_back(entry);
    }
    resolve_conflicts(placed, plan, static_cast<int>(r));
    for (PlacedObject& p : placed) {
      out.mesh.append(p.mesh);
      out.objects.push_back(std::move(p));
    }
  }
  return out;
}

TriMesh to_gltf_frame(const TriMesh& mesh) {
  TriMesh out = mesh;
  for (Vec3& v : out.vertices) v = Vec3(v.x(), v.z(), -v.y());
  return out;
}

TriMesh from_gltf_frame(const TriMesh& mesh) {
  TriMesh out = mesh;
  for (Vec3& v : out.vertices) v = Vec3(v.x(), -v.z(), v.y());
  return out;
}

std::vector<ReconstructedObject> load_objects(const std::filesystem::path& dir,
                                              const std::map<std::string, Camera>& cameras) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("object manifest: ") + e.what());
  }
  std::vector<ReconstructedObject> out;
  try {
    for (const auto& o : manifest.at("objects")) {
      ReconstructedObject obj;
      obj.id = o.at("object_id").get<std::string>();
      obj.label = o.at("label").get<std::string>();
      const std::string cam_id = o.at("source_camera_id").get<std::string>();
      auto cam = cameras.find(cam_id);
      if (cam == cameras.end()) throw Error(ErrorCode::kSchemaError, "object '" + obj.id + "' references unknown camera '" + cam_id + "'");
      obj.source_camera = cam->second;
      const auto& q = o.at("pose").at("quat_wxyz");
      const auto& t = o.at("pose").at("translation");
      obj.pose.rotation = Quat(q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>(), q.at(3).get<double>());
      if (obj.pose.rotation.norm() < 1e-12) throw Error(ErrorCode::kZeroQuaternion, "object '" + obj.id + "' has a zero pose rotation");
      obj.pose.rotation.normalize();
      obj.pose.translation = Vec3(t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>());
      const std::string file = o.value("mesh", obj.id + ".glb");
      auto prims = import_glb(dir / file);
      obj.mesh = to_gltf_frame(merge_primitives(prims));
      for (auto& p : prims)
        if (p.texture) {
          obj.texture = std::move(p.texture);
          break;
        }
      out.push_back(std::move(obj));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("object manifest: ") + e.what());
  }
  return out;
}

}  // namespace worldmesh
