#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "speedfill/geometry.hpp"

namespace speedfill {

/// Dense index of a segment inside a RoadNet. Segments are stored sorted by id,
/// so ordering by index is ordering by id.
using SegIndex = std::uint32_t;
using VertexIndex = std::uint32_t;

/// Geographic anchor of the planar frame (degrees).
struct GeoOrigin {
  double lon = 114.05;
  double lat = 22.55;
};

/// One directed road segment: a single entrance, a single exit, travel allowed
/// from entrance to exit only.
struct RoadSegment {
  std::string id;
  std::vector<Point> polyline;  // entrance -> exit, at least two points
  std::string entrance;
  std::string exit;
  double length = 0.0;
};

/// Point on the net: segment plus arc-length offset from its entrance.
struct NetPosition {
  SegIndex segment = 0;
  double offset = 0.0;
};

/// Shortest lawful path between the central points of two segments.
struct SegmentPath {
  double distance = 0.0;  // meters, cp(u) -> cp(r)
  int intersections = 0;  // intersections crossed on that path
};

/// Member of an upstream neighborhood A_r.
struct UpstreamEntry {
  SegIndex segment = 0;
  double distance = 0.0;      // cp-to-cp network distance
  int intersections = 0;      // distI
  double dist_product = 0.0;  // distance * intersections
};

[[nodiscard]] Point central_point(const RoadSegment& seg);

class RoadNet {
 public:
  RoadNet() = default;
  /// Validates and indexes the segments. Throws ValidationError on duplicate
  /// ids, short or zero-length polylines, or vertices (when listed) that are
  /// dangling or unknown.
  explicit RoadNet(std::vector<RoadSegment> segments,
                   std::optional<std::vector<std::string>> declared_vertices = std::nullopt,
                   GeoOrigin origin = {});

  [[nodiscard]] std::size_t size() const { return segments_.size(); }
  [[nodiscard]] std::size_t vertex_count() const { return vertex_ids_.size(); }
  [[nodiscard]] const RoadSegment& segment(SegIndex s) const { return segments_[s]; }
  [[nodiscard]] std::span<const RoadSegment> segments() const { return segments_; }
  [[nodiscard]] const std::string& vertex_id(VertexIndex v) const { return vertex_ids_[v]; }
  [[nodiscard]] std::optional<SegIndex> find(std::string_view id) const;
  [[nodiscard]] SegIndex index_of(std::string_view id) const;  // throws ValidationError

  [[nodiscard]] VertexIndex entrance_vertex(SegIndex s) const { return entrance_[s]; }
  [[nodiscard]] VertexIndex exit_vertex(SegIndex s) const { return exit_[s]; }
  [[nodiscard]] std::span<const SegIndex> outward(SegIndex s) const { return outward_[s]; }
  [[nodiscard]] std::span<const SegIndex> inward(SegIndex s) const { return inward_[s]; }
  [[nodiscard]] Point central_point(SegIndex s) const { return central_points_[s]; }
  [[nodiscard]] double length(SegIndex s) const { return segments_[s].length; }
  [[nodiscard]] BoundingBox bounds() const { return bounds_; }
  [[nodiscard]] const GeoOrigin& origin() const { return origin_; }

  /// Shortest directed path length from `from` to `to`; nullopt when no path
  /// exists or the path would exceed `max_distance`.
  [[nodiscard]] std::optional<double> network_distance(
      NetPosition from, NetPosition to,
      double max_distance = std::numeric_limits<double>::infinity()) const;

  /// cp(u) -> cp(r) shortest path with its intersection count. Among equally
  /// short paths the one with fewer intersections wins.
  [[nodiscard]] std::optional<SegmentPath> segment_path(SegIndex u, SegIndex r) const;

  /// Intersections on the cp(u) -> cp(r) shortest path; throws Unreachable.
  [[nodiscard]] int intersection_distance(SegIndex u, SegIndex r) const;

  /// Segments u != r with a directed path to r and dist*distI <= d_A, ordered
  /// by that product, ties by index.
  [[nodiscard]] std::vector<UpstreamEntry> upstream_set(SegIndex r, double d_a) const;

 private:
  struct VertexSearch {
    double distance;
    int vertices;  // vertices on the path, both ends included
  };
  [[nodiscard]] std::optional<VertexSearch> vertex_path(VertexIndex from, VertexIndex to,
                                                        double max_distance) const;

  std::vector<RoadSegment> segments_;
  std::vector<std::string> vertex_ids_;
  std::unordered_map<std::string, SegIndex> by_id_;
  std::vector<VertexIndex> entrance_;
  std::vector<VertexIndex> exit_;
  std::vector<std::vector<SegIndex>> outward_;
  std::vector<std::vector<SegIndex>> inward_;
  std::vector<std::vector<SegIndex>> leaving_vertex_;   // segments whose entrance is v
  std::vector<std::vector<SegIndex>> entering_vertex_;  // segments whose exit is v
  std::vector<Point> central_points_;
  BoundingBox bounds_;
  GeoOrigin origin_;
};

/// upstream_set for every segment, indexed by segment.
[[nodiscard]] std::vector<std::vector<UpstreamEntry>> upstream_sets(const RoadNet& net, double d_a);

/// JSON road net: either an array of segments or an object
/// {"origin": {"lon","lat"}, "vertices": [...], "segments": [...]}; each segment is
/// {"id", "polyline": [[x,y],...], "entrance", "exit"}.
[[nodiscard]] RoadNet road_net_from_json(const nlohmann::json& doc);
[[nodiscard]] nlohmann::json road_net_to_json(const RoadNet& net);
[[nodiscard]] RoadNet load_road_net(const std::filesystem::path& path);
void save_road_net(const RoadNet& net, const std::filesystem::path& path);

}  // namespace speedfill
