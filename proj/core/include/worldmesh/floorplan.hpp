#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "worldmesh/error.hpp"
#include "worldmesh/geom/polygon.hpp"

namespace worldmesh {

inline constexpr std::string_view kLayoutVersion = "worldmesh-layout/1";
inline constexpr double kEdgeMatchTol = 0.01;
inline constexpr double kMinSharedLength = 0.1;

enum class OpeningKind { kDoor, kWindow, kPassage };
std::string_view to_string(OpeningKind k);

struct Opening {
  OpeningKind kind = OpeningKind::kDoor;
  int edge = 0;
  double offset = 0;
  double width = 0;
  double sill = 0;
  double head = 0;
  // Set when this opening restates one already declared by an earlier room on
  // the shared wall; it is carved once, through the earlier declaration.
  bool mirrored = false;

  double end() const { return offset + width; }
  bool walkable() const { return kind != OpeningKind::kWindow; }
  bool operator==(const Opening&) const = default;
};

// Co-located copy of a neighbour's opening on one of this room's edges.
struct LinkedOpening {
  std::string host_room;
  int host_opening = 0;
  Opening opening;  // edge/offset expressed on this room's polygon
  bool operator==(const LinkedOpening&) const = default;
};

struct Room {
  std::string id;
  std::string kind;
  Polygon2D floor;
  double ceiling_height = 0;
  std::vector<Opening> openings;
  std::vector<LinkedOpening> linked;
  bool operator==(const Room&) const = default;
};

struct FloorPlan {
  std::string theme;
  double wall_thickness = 0;
  std::vector<Room> rooms;

  const Room& room(std::string_view id) const;
  int room_index(std::string_view id) const;  // -1 when absent
  bool operator==(const FloorPlan&) const = default;
};

// Collinear overlap between edge_a of rooms[room_a] and edge_b of rooms[room_b]
// (room_a < room_b). Arc lengths are measured from each edge's start vertex.
struct SharedEdge {
  int room_a = 0;
  int edge_a = 0;
  int room_b = 0;
  int edge_b = 0;
  SegmentOverlap overlap{};
  Vec2 p0, p1;  // overlap segment in world XY, p0 at overlap.a0

  double map_to_b(double s_a) const;
  double map_to_a(double s_b) const;
};

std::vector<SharedEdge> detect_shared_edges(const FloorPlan& plan);

// Throws Error{kSchemaError} with a JSON path, or Error{kInvariantError}
// naming the offending room/opening.
FloorPlan parse_layout(std::string_view document);
FloorPlan load_layout(const std::filesystem::path& path);
std::string serialize_layout(const FloorPlan& plan);

struct Violation {
  std::string rule_id;
  std::string message;
  std::vector<std::string> offending_ids;
  bool inferred = false;  // rules not stated by the source method, see README
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool valid() const { return violations.empty(); }
  bool has(std::string_view rule) const;
  std::string to_json() const;
};

struct RuleSet {
  bool r1_no_shared_windows = true;
  bool r2_no_overlap = true;
  bool r3_connected = true;
  bool r4_counterpart = true;
  bool r5_disjoint_openings = true;
};

ValidationReport validate_layout(const FloorPlan& plan, const RuleSet& rules = {});

// Identifier used in reports for an opening: "<room>/openings[<i>]".
std::string opening_id(const Room& room, std::size_t index);

class LayoutProvider {
 public:
  virtual ~LayoutProvider() = default;
  virtual std::string next(const std::string& prompt) = 0;
};

// Serves the *.json files of a directory in lexicographic order.
class DirectoryLayoutProvider : public LayoutProvider {
 public:
  explicit DirectoryLayoutProvider(const std::filesystem::path& dir);
  std::string next(const std::string& prompt) override;

 private:
  std::vector<std::filesystem::path> files_;
  std::size_t cursor_ = 0;
};

// Fixed in-memory sequence; used by tests.
class SequenceLayoutProvider : public LayoutProvider {
 public:
  explicit SequenceLayoutProvider(std::vector<std::string> docs) : docs_(std::move(docs)) {}
  std::string next(const std::string& prompt) override;

 private:
  std::vector<std::string> docs_;
  std::size_t cursor_ = 0;
};

// Command receives {"prompt": ...} on stdin and prints one layout document.
class CommandLayoutProvider : public LayoutProvider {
 public:
  explicit CommandLayoutProvider(std::string command) : command_(std::move(command)) {}
  std::string next(const std::string& prompt) override;

 private:
  std::string command_;
};

class HttpLayoutProvider : public LayoutProvider {
 public:
  explicit HttpLayoutProvider(std::string url) : url_(std::move(url)) {}
  std::string next(const std::string& prompt) override;

 private:
  std::string url_;
};

struct SampleResult {
  FloorPlan plan;
  int attempts = 0;
  std::vector<ValidationReport> reports;  // one per attempt, last one valid
};

class LayoutExhausted : public Error {
 public:
  explicit LayoutExhausted(std::vector<ValidationReport> reports);
  const std::vector<ValidationReport>& reports() const { return reports_; }

 private:
  std::vector<ValidationReport> reports_;
};

// Documents that fail to parse count as attempts with a single "schema"
// violation. Throws LayoutExhausted after max_attempts invalid candidates.
SampleResult sample_until_valid(LayoutProvider& provider, const std::string& prompt, int max_attempts,
                                const RuleSet& rules = {});

}  // namespace worldmesh
