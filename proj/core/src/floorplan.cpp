#include "worldmesh/floorplan.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "worldmesh/image.hpp"
#include "worldmesh/transport.hpp"

namespace worldmesh {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string_view to_string(OpeningKind k) {
  switch (k) {
    case OpeningKind::kDoor: return "door";
    case OpeningKind::kWindow: return "window";
    case OpeningKind::kPassage: return "passage";
  }
  return "door";
}

const Room& FloorPlan::room(std::string_view id) const {
  int i = room_index(id);
  if (i < 0) throw Error(ErrorCode::kInvalidArgument, "no room with id '" + std::string(id) + "'");
  return rooms[static_cast<std::size_t>(i)];
}

int FloorPlan::room_index(std::string_view id) const {
  for (std::size_t i = 0; i < rooms.size(); ++i)
    if (rooms[i].id == id) return static_cast<int>(i);
  return -1;
}

double SharedEdge::map_to_b(double s_a) const {
  return overlap.b0 + (s_a - overlap.a0) * (overlap.b1 - overlap.b0) / (overlap.a1 - overlap.a0);
}

double SharedEdge::map_to_a(double s_b) const {
  return overlap.a0 + (s_b - overlap.b0) * (overlap.a1 - overlap.a0) / (overlap.b1 - overlap.b0);
}

std::vector<SharedEdge> detect_shared_edges(const FloorPlan& plan) {
  std::vector<SharedEdge> out;
  for (std::size_t a = 0; a < plan.rooms.size(); ++a) {
    const Polygon2D& pa = plan.rooms[a].floor;
    for (std::size_t b = a + 1; b < plan.rooms.size(); ++b) {
      const Polygon2D& pb = plan.rooms[b].floor;
      for (std::size_t ea = 0; ea < pa.size(); ++ea) {
        for (std::size_t eb = 0; eb < pb.size(); ++eb) {
          // Abutting CCW rooms traverse a common wall in opposite directions.
          if (pa.edge_direction(ea).dot(pb.edge_direction(eb)) >= 0) continue;
          auto ov = collinear_overlap(pa.edge_start(ea), pa.edge_end(ea), pb.edge_start(eb), pb.edge_end(eb),
                                      kEdgeMatchTol, kMinSharedLength);
          if (!ov) continue;
          SharedEdge s;
          s.room_a = static_cast<int>(a);
          s.edge_a = static_cast<int>(ea);
          s.room_b = static_cast<int>(b);
          s.edge_b = static_cast<int>(eb);
          s.overlap = *ov;
          Vec2 u = pa.edge_direction(ea);
          s.p0 = pa.edge_start(ea) + u * ov->a0;
          s.p1 = pa.edge_start(ea) + u * ov->a1;
          out.push_back(s);
        }
      }
    }
  }
  return out;
}

std::string opening_id(const Room& room, std::size_t index) {
  return room.id + "/openings[" + std::to_string(index) + "]";
}

namespace {

[[noreturn]] void schema_fail(const std::string& path, const std::string& msg) {
  throw Error(ErrorCode::kSchemaError, path + ": " + msg);
}

[[noreturn]] void invariant_fail(const std::string& who, const std::string& msg) {
  throw Error(ErrorCode::kInvariantError, who + ": " + msg);
}

const json& field(const json& obj, const std::string& path, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) schema_fail(path + "." + key, "missing field");
  return *it;
}

double number(const json& obj, const std::string& path, const char* key) {
  const json& v = field(obj, path, key);
  if (!v.is_number()) schema_fail(path + "." + key, "expected number");
  double d = v.get<double>();
  if (!std::isfinite(d)) schema_fail(path + "." + key, "expected finite number");
  return d;
}

int integer(const json& obj, const std::string& path, const char* key) {
  const json& v = field(obj, path, key);
  if (!v.is_number_integer()) schema_fail(path + "." + key, "expected integer");
  return v.get<int>();
}

std::string string(const json& obj, const std::string& path, const char* key) {
  const json& v = field(obj, path, key);
  if (!v.is_string()) schema_fail(path + "." + key, "expected string");
  return v.get<std::string>();
}

const json& array(const json& obj, const std::string& path, const char* key) {
  const json& v = field(obj, path, key);
  if (!v.is_array()) schema_fail(path + "." + key, "expected array");
  return v;
}

Opening parse_opening(const json& j, const std::string& path) {
  if (!j.is_object()) schema_fail(path, "expected object");
  Opening o;
  std::string kind = string(j, path, "kind");
  if (kind == "door") o.kind = OpeningKind::kDoor;
  else if (kind == "window") o.kind = OpeningKind::kWindow;
  else if (kind == "passage") o.kind = OpeningKind::kPassage;
  else schema_fail(path + ".kind", "expected \"door\", \"window\" or \"passage\"");
  o.edge = integer(j, path, "edge");
  o.offset = number(j, path, "offset");
  o.width = number(j, path, "width");
  o.sill = number(j, path, "sill");
  o.head = number(j, path, "head");
  return o;
}

void check_opening(const Room& room, std::size_t index) {
  const Opening& o = room.openings[index];
  const std::string who = opening_id(room, index);
  constexpr double kSlack = 1e-9;
  if (o.edge < 0 || static_cast<std::size_t>(o.edge) >= room.floor.size())
    invariant_fail(who, "edge index " + std::to_string(o.edge) + " out of range");
  if (o.width <= 0) invariant_fail(who, "width must be positive");
  if (o.offset < -kSlack) invariant_fail(who, "offset must be non-negative");
  if (o.end() > room.floor.edge_length(static_cast<std::size_t>(o.edge)) + kSlack)
    invariant_fail(who, "offset + width exceeds the hosting edge length");
  if (o.sill < -kSlack) invariant_fail(who, "sill_height must be non-negative");
  if (o.sill >= o.head) invariant_fail(who, "sill_height must be below head_height");
  if (o.head > room.ceiling_height + kSlack) invariant_fail(who, "head_height exceeds ceiling_height");
  if (o.walkable()) {
    if (o.width < 0.5 - kSlack) invariant_fail(who, "doors and passages must be at least 0.5 m wide");
    if (std::abs(o.sill) > kSlack) invariant_fail(who, "doors and passages must have sill_height 0");
  }
}

// Interval of the shared overlap on the given room's edge.
std::pair<double, double> overlap_on(const SharedEdge& s, int room) {
  if (room == s.room_a) return {s.overlap.a0, s.overlap.a1};
  return {std::min(s.overlap.b0, s.overlap.b1), std::max(s.overlap.b0, s.overlap.b1)};
}

double interval_overlap(double a0, double a1, double b0, double b1) { return std::min(a1, b1) - std::max(a0, b0); }

constexpr double kIntervalEps = 1e-9;

// Shared edges touched by opening `o` of rooms[r] (span intersects the overlap).
std::vector<const SharedEdge*> touching(const std::vector<SharedEdge>& shared, int r, const Opening& o) {
  std::vector<const SharedEdge*> out;
  for (const SharedEdge& s : shared) {
    bool on_a = s.room_a == r && s.edge_a == o.edge;
    bool on_b = s.room_b == r && s.edge_b == o.edge;
    if (!on_a && !on_b) continue;
    auto [lo, hi] = overlap_on(s, r);
    if (interval_overlap(o.offset, o.end(), lo, hi) > kIntervalEps) out.push_back(&s);
  }
  return out;
}

void propagate_openings(FloorPlan& plan) {
  const auto shared = detect_shared_edges(plan);
  for (std::size_t r = 0; r < plan.rooms.size(); ++r) {
    for (std::size_t k = 0; k < plan.rooms[r].openings.size(); ++k) {
      const Opening o = plan.rooms[r].openings[k];
      if (o.mirrored) continue;
      for (const SharedEdge* s : touching(shared, static_cast<int>(r), o)) {
        const bool host_is_a = s->room_a == static_cast<int>(r);
        const int n = host_is_a ? s->room_b : s->room_a;
        const int n_edge = host_is_a ? s->edge_b : s->edge_a;
        double m0 = host_is_a ? s->map_to_b(o.offset) : s->map_to_a(o.offset);
        double m1 = host_is_a ? s->map_to_b(o.end()) : s->map_to_a(o.end());
        Opening copy = o;
        copy.edge = n_edge;
        copy.offset = std::min(m0, m1);
        Room& nb = plan.rooms[static_cast<std::size_t>(n)];
        bool restated = false;
        for (Opening& own : nb.openings) {
          if (own.mirrored || own.edge != n_edge || own.kind != o.kind) continue;
          if (std::abs(own.offset - copy.offset) <= kEdgeMatchTol && std::abs(own.width - copy.width) <= kEdgeMatchTol &&
              static_cast<std::size_t>(n) > r) {
            own.mirrored = true;
            restated = true;
            break;
          }
        }
        if (!restated) nb.linked.push_back({plan.rooms[r].id, static_cast<int>(k), copy});
      }
    }
  }
}

}  // namespace

FloorPlan parse_layout(std::string_view document) {
  json j;
  try {
    j = json::parse(document);
  } catch (const json::parse_error& e) {
    schema_fail("$", std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) schema_fail("$", "expected object");
  std::string version = string(j, "$", "version");
  if (version != kLayoutVersion) schema_fail("$.version", "unsupported version \"" + version + "\"");

  FloorPlan plan;
  plan.theme = string(j, "$", "theme");
  plan.wall_thickness = number(j, "$", "wall_thickness");
  const json& rooms = array(j, "$", "rooms");

  for (std::size_t i = 0; i < rooms.size(); ++i) {
    const std::string path = "$.rooms[" + std::to_string(i) + "]";
    const json& rj = rooms[i];
    if (!rj.is_object()) schema_fail(path, "expected object");
    std::string id = string(rj, path, "id");
    std::string kind = string(rj, path, "kind");
    double height = number(rj, path, "ceiling_height");
    const json& poly = array(rj, path, "floor_polygon");
    std::vector<Vec2> pts;
    for (std::size_t v = 0; v < poly.size(); ++v) {
      const std::string vp = path + ".floor_polygon[" + std::to_string(v) + "]";
      const json& pj = poly[v];
      if (!pj.is_array() || pj.size() != 2 || !pj[0].is_number() || !pj[1].is_number())
        schema_fail(vp, "expected [x, y]");
      pts.emplace_back(pj[0].get<double>(), pj[1].get<double>());
    }
    const json& ops = array(rj, path, "openings");
    std::vector<Opening> openings;
    for (std::size_t k = 0; k < ops.size(); ++k)
      openings.push_back(parse_opening(ops[k], path + ".openings[" + std::to_string(k) + "]"));

    const std::string who = "room '" + id + "'";
    if (id.empty()) invariant_fail("room " + std::to_string(i), "id must be non-empty");
    if (pts.size() >= 3 && signed_area(pts) < 0) invariant_fail(who, "floor_polygon must be counter-clockwise");
    std::optional<Polygon2D> floor;
    try {
      floor.emplace(std::move(pts));
    } catch (const Error& e) {
      invariant_fail(who, std::string("floor_polygon invalid (") + e.what() + ")");
    }
    if (floor->area() < 1.0) invariant_fail(who, "floor area below 1 m^2");
    if (!(height > 2.0 && height < 6.0)) invariant_fail(who, "ceiling_height must lie in (2, 6) m");
    plan.rooms.push_back(Room{std::move(id), std::move(kind), std::move(*floor), height, std::move(openings), {}});
  }

  if (!(plan.wall_thickness > 0.02 && plan.wall_thickness < 1.0))
    invariant_fail("plan", "wall_thickness must lie in (0.02, 1.0) m");
  for (std::size_t i = 0; i < plan.rooms.size(); ++i)
    for (std::size_t k = i + 1; k < plan.rooms.size(); ++k)
      if (plan.rooms[i].id == plan.rooms[k].id) invariant_fail("room '" + plan.rooms[i].id + "'", "duplicate room id");
  for (const Room& r : plan.rooms)
    for (std::size_t k = 0; k < r.openings.size(); ++k) check_opening(r, k);

  propagate_openings(plan);
  return plan;
}

FloorPlan load_layout(const std::filesystem::path& path) { return parse_layout(read_text(path)); }

std::string serialize_layout(const FloorPlan& plan) {
  ojson j;
  j["version"] = kLayoutVersion;
  j["theme"] = plan.theme;
  j["wall_thickness"] = plan.wall_thickness;
  j["rooms"] = ojson::array();
  for (const Room& r : plan.rooms) {
    ojson rj;
    rj["id"] = r.id;
    rj["kind"] = r.kind;
    rj["ceiling_height"] = r.ceiling_height;
    rj["floor_polygon"] = ojson::array();
    for (const Vec2& v : r.floor.vertices()) rj["floor_polygon"].push_back({v.x(), v.y()});
    rj["openings"] = ojson::array();
    for (const Opening& o : r.openings) {
      ojson oj;
      oj["kind"] = to_string(o.kind);
      oj["edge"] = o.edge;
      oj["offset"] = o.offset;
      oj["width"] = o.width;
      oj["sill"] = o.sill;
      oj["head"] = o.head;
      rj["openings"].push_back(std::move(oj));
    }
    j["rooms"].push_back(std::move(rj));
  }
  return j.dump(2) + "\n";
}

bool ValidationReport::has(std::string_view rule) const {
  return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) { return v.rule_id == rule; });
}

std::string ValidationReport::to_json() const {
  ojson j;
  j["valid"] = valid();
  j["violations"] = ojson::array();
  for (const Violation& v : violations) {
    ojson vj;
    vj["rule_id"] = v.rule_id;
    vj["message"] = v.message;
    vj["offending_ids"] = v.offending_ids;
    vj["inferred"] = v.inferred;
    j["violations"].push_back(std::move(vj));
  }
  return j.dump(2);
}

ValidationReport validate_layout(const FloorPlan& plan, const RuleSet& rules) {
  ValidationReport report;
  const auto shared = detect_shared_edges(plan);
  const int n = static_cast<int>(plan.rooms.size());
  auto room_id = [&](int r) { return plan.rooms[static_cast<std::size_t>(r)].id; };
  auto other = [](const SharedEdge& s, int r) { return s.room_a == r ? s.room_b : s.room_a; };

  if (rules.r1_no_shared_windows) {
    for (int r = 0; r < n; ++r) {
      const Room& room = plan.rooms[static_cast<std::size_t>(r)];
      for (std::size_t k = 0; k < room.openings.size(); ++k) {
        const Opening& o = room.openings[k];
        if (o.kind != OpeningKind::kWindow) continue;
        for (const SharedEdge* s : touching(shared, r, o))
          report.violations.push_back({"R1", "window on a wall shared with room '" + room_id(other(*s, r)) + "'",
                                       {opening_id(room, k), room_id(other(*s, r))}, false});
      }
    }
  }

  if (rules.r2_no_overlap) {
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) {
        double area = intersection_area(plan.rooms[static_cast<std::size_t>(a)].floor,
                                        plan.rooms[static_cast<std::size_t>(b)].floor);
        if (area >= 1e-4) {
          std::ostringstream msg;
          msg << "rooms overlap by " << area << " m^2";
          report.violations.push_back({"R2", msg.str(), {room_id(a), room_id(b)}, true});
        }
      }
  }

  if (rules.r3_connected && n > 1) {
    std::vector<int> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
      while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      return x;
    };
    for (int r = 0; r < n; ++r)
      for (const Opening& o : plan.rooms[static_cast<std::size_t>(r)].openings)
        if (o.walkable())
          for (const SharedEdge* s : touching(shared, r, o)) parent[static_cast<std::size_t>(find(r))] = find(other(*s, r));
    std::map<int, std::vector<std::string>> components;
    for (int r = 0; r < n; ++r) components[find(r)].push_back(room_id(r));
    if (components.size() > 1) {
      // Report every room outside the component holding the first room.
      std::vector<std::string> cut;
      const int root0 = find(0);
      for (int r = 0; r < n; ++r)
        if (find(r) != root0) cut.push_back(room_id(r));
      report.violations.push_back({"R3",
                                   "door/passage adjacency graph has " + std::to_string(components.size()) +
                                       " components",
                                   cut, true});
    }
  }

  if (rules.r4_counterpart) {
    for (int r = 0; r < n; ++r) {
      const Room& room = plan.rooms[static_cast<std::size_t>(r)];
      for (std::size_t k = 0; k < room.openings.size(); ++k) {
        const Opening& o = room.openings[k];
        if (!o.walkable() || o.mirrored) continue;
        for (const SharedEdge* s : touching(shared, r, o)) {
          auto [lo, hi] = overlap_on(*s, r);
          if (o.offset < lo - kEdgeMatchTol || o.end() > hi + kEdgeMatchTol)
            report.violations.push_back({"R4",
                                         "opening extends past the wall shared with room '" + room_id(other(*s, r)) +
                                             "', no co-located counterpart on the neighbour",
                                         {opening_id(room, k), room_id(other(*s, r))}, true});
        }
      }
    }
  }

  if (rules.r5_disjoint_openings) {
    for (const Room& room : plan.rooms) {
      struct Span {
        int edge;
        double lo, hi;
        std::string id;
      };
      std::vector<Span> spans;
      for (std::size_t k = 0; k < room.openings.size(); ++k) {
        const Opening& o = room.openings[k];
        spans.push_back({o.edge, o.offset, o.end(), opening_id(room, k)});
      }
      for (const LinkedOpening& l : room.linked)
        spans.push_back({l.opening.edge, l.opening.offset, l.opening.end(),
                         opening_id(plan.room(l.host_room), static_cast<std::size_t>(l.host_opening))});
      for (std::size_t i = 0; i < spans.size(); ++i)
        for (std::size_t k = i + 1; k < spans.size(); ++k)
          if (spans[i].edge == spans[k].edge &&
              interval_overlap(spans[i].lo, spans[i].hi, spans[k].lo, spans[k].hi) > kIntervalEps)
            report.violations.push_back({"R5",
                                         "openings overlap on edge " + std::to_string(spans[i].edge) + " of room '" +
                                             room.id + "'",
                                         {spans[i].id, spans[k].id}, true});
    }
  }
  return report;
}

DirectoryLayoutProvider::DirectoryLayoutProvider(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw Error(ErrorCode::kAdapterFailure, "layout fixture directory not found: " + dir.string());
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files_.push_back(e.path());
  std::sort(files_.begin(), files_.end());
}

std::string DirectoryLayoutProvider::next(const std::string&) {
  if (cursor_ >= files_.size()) throw Error(ErrorCode::kAdapterFailure, "layout fixture directory exhausted");
  return read_text(files_[cursor_++]);
}

std::string SequenceLayoutProvider::next(const std::string&) {
  if (cursor_ >= docs_.size()) throw Error(ErrorCode::kAdapterFailure, "layout sequence exhausted");
  return docs_[cursor_++];
}

std::string CommandLayoutProvider::next(const std::string& prompt) {
  return run_command(command_, json{{"prompt", prompt}}.dump());
}

std::string HttpLayoutProvider::next(const std::string& prompt) {
  return http_post(url_, "application/json", json{{"prompt", prompt}}.dump());
}

LayoutExhausted::LayoutExhausted(std::vector<ValidationReport> reports)
    : Error(ErrorCode::kExhaustedAttempts,
            "no valid layout after " + std::to_string(reports.size()) + " attempt(s)"),
      reports_(std::move(reports)) {}

SampleResult sample_until_valid(LayoutProvider& provider, const std::string& prompt, int max_attempts,
                                const RuleSet& rules) {
  if (max_attempts < 1) throw Error(ErrorCode::kInvalidArgument, "max_attempts must be >= 1");
  std::vector<ValidationReport> reports;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    std::string doc = provider.next(prompt);
    try {
      FloorPlan plan = parse_layout(doc);
      ValidationReport rep = validate_layout(plan, rules);
      reports.push_back(rep);
      if (rep.valid()) return SampleResult{std::move(plan), attempt, std::move(reports)};
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSchemaError && e.code() != ErrorCode::kInvariantError) throw;
      ValidationReport rep;
      rep.violations.push_back({"schema", e.what(), {}, false});
      reports.push_back(std::move(rep));
    }
  }
  throw LayoutExhausted(std::move(reports));
}

}  // namespace worldmesh
