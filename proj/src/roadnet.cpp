#include "speedfill/roadnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <set>
#include <tuple>

#include "speedfill/errors.hpp"

namespace speedfill {

namespace {

struct QueueItem {
  double distance;
  int vertices;
  VertexIndex vertex;
  bool operator>(const QueueItem& o) const {
    return std::tie(distance, vertices, vertex) > std::tie(o.distance, o.vertices, o.vertex);
  }
};

using MinQueue = std::priority_queue<QueueItem, std::vector<QueueItem>, std::greater<>>;

bool better(double d, int v, double best_d, int best_v) {
  return d < best_d || (d == best_d && v < best_v);
}

}  // namespace

Point central_point(const RoadSegment& seg) { return point_at_offset(seg.polyline, polyline_length(seg.polyline) / 2.0); }

RoadNet::RoadNet(std::vector<RoadSegment> segments,
                 std::optional<std::vector<std::string>> declared_vertices, GeoOrigin origin)
    : segments_(std::move(segments)), origin_(origin) {
  std::sort(segments_.begin(), segments_.end(),
            [](const RoadSegment& a, const RoadSegment& b) { return a.id < b.id; });

  std::unordered_map<std::string, VertexIndex> vertex_index;
  auto intern = [&](const std::string& id) {
    auto [it, inserted] = vertex_index.try_emplace(id, static_cast<VertexIndex>(vertex_ids_.size()));
    if (inserted) vertex_ids_.push_back(id);
    return it->second;
  };

  if (declared_vertices) {
    for (const auto& v : *declared_vertices) {
      if (vertex_index.contains(v)) throw ValidationError("duplicate vertex id '" + v + "'");
      intern(v);
    }
  }

  const std::size_t n = segments_.size();
  entrance_.resize(n);
  exit_.resize(n);
  central_points_.resize(n);
  bounds_ = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
             -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};

  for (std::size_t i = 0; i < n; ++i) {
    RoadSegment& seg = segments_[i];
    if (!by_id_.emplace(seg.id, static_cast<SegIndex>(i)).second)
      throw ValidationError("duplicate segment id '" + seg.id + "'");
    if (seg.polyline.size() < 2)
      throw ValidationError("segment '" + seg.id + "' needs at least two polyline points");
    for (const Point& p : seg.polyline) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y))
        throw ValidationError("segment '" + seg.id + "' has a non-finite coordinate");
      bounds_.min_x = std::min(bounds_.min_x, p.x);
      bounds_.min_y = std::min(bounds_.min_y, p.y);
      bounds_.max_x = std::max(bounds_.max_x, p.x);
      bounds_.max_y = std::max(bounds_.max_y, p.y);
    }
    seg.length = polyline_length(seg.polyline);
    if (!(seg.length > 0.0)) throw ValidationError("segment '" + seg.id + "' has zero length");
    if (seg.entrance.empty() || seg.exit.empty())
      throw ValidationError("segment '" + seg.id + "' lacks entrance or exit vertex");
    if (declared_vertices) {
      if (!vertex_index.contains(seg.entrance) || !vertex_index.contains(seg.exit))
        throw ValidationError("segment '" + seg.id + "' references an undeclared vertex");
    }
    entrance_[i] = intern(seg.entrance);
    exit_[i] = intern(seg.exit);
    central_points_[i] = speedfill::central_point(seg);
  }
  if (n == 0) bounds_ = {};

  leaving_vertex_.assign(vertex_ids_.size(), {});
  entering_vertex_.assign(vertex_ids_.size(), {});
  for (SegIndex s = 0; s < n; ++s) {
    leaving_vertex_[entrance_[s]].push_back(s);
    entering_vertex_[exit_[s]].push_back(s);
  }
  for (VertexIndex v = 0; v < vertex_ids_.size(); ++v) {
    if (leaving_vertex_[v].empty() && entering_vertex_[v].empty())
      throw ValidationError("dangling vertex '" + vertex_ids_[v] + "'");
  }

  outward_.assign(n, {});
  inward_.assign(n, {});
  for (SegIndex s = 0; s < n; ++s) {
    outward_[s] = leaving_vertex_[exit_[s]];
    inward_[s] = entering_vertex_[entrance_[s]];
  }
}

std::optional<SegIndex> RoadNet::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

SegIndex RoadNet::index_of(std::string_view id) const {
  auto idx = find(id);
  if (!idx) throw ValidationError("unknown segment id '" + std::string(id) + "'");
  return *idx;
}

std::optional<RoadNet::VertexSearch> RoadNet::vertex_path(VertexIndex from, VertexIndex to,
                                                          double max_distance) const {
  if (from == to) return VertexSearch{0.0, 1};
  std::unordered_map<VertexIndex, std::pair<double, int>> best;
  MinQueue queue;
  best[from] = {0.0, 1};
  queue.push({0.0, 1, from});
  while (!queue.empty()) {
    const QueueItem item = queue.top();
    queue.pop();
    const auto& settled = best[item.vertex];
    if (item.distance != settled.first || item.vertices != settled.second) continue;
    if (item.vertex == to) return VertexSearch{item.distance, item.vertices};
    if (item.distance > max_distance) break;
    for (SegIndex s : leaving_vertex_[item.vertex]) {
      const VertexIndex next = exit_[s];
      const double d = item.distance + segments_[s].length;
      const int v = item.vertices + 1;
      if (d > max_distance) continue;
      auto it = best.find(next);
      if (it == best.end() || better(d, v, it->second.first, it->second.second)) {
        best[next] = {d, v};
        queue.push({d, v, next});
      }
    }
  }
  return std::nullopt;
}

std::optional<double> RoadNet::network_distance(NetPosition from, NetPosition to,
                                                double max_distance) const {
  if (from.segment == to.segment && to.offset >= from.offset) {
    const double d = to.offset - from.offset;
    if (d > max_distance) return std::nullopt;
    return d;
  }
  const double remainder = std::max(0.0, length(from.segment) - from.offset);
  const double prefix = std::max(0.0, to.offset);
  const double budget = max_distance - remainder - prefix;
  if (budget < 0.0) return std::nullopt;
  auto path = vertex_path(exit_[from.segment], entrance_[to.segment], budget);
  if (!path) return std::nullopt;
  return remainder + path->distance + prefix;
}

std::optional<SegmentPath> RoadNet::segment_path(SegIndex u, SegIndex r) const {
  if (u == r) return SegmentPath{0.0, 0};
  auto path = vertex_path(exit_[u], entrance_[r], std::numeric_limits<double>::infinity());
  if (!path) return std::nullopt;
  return SegmentPath{length(u) / 2.0 + path->distance + length(r) / 2.0, path->vertices};
}

int RoadNet::intersection_distance(SegIndex u, SegIndex r) const {
  auto path = segment_path(u, r);
  if (!path)
    throw Unreachable("no directed path from '" + segments_[u].id + "' to '" + segments_[r].id + "'");
  return path->intersections;
}

std::vector<UpstreamEntry> RoadNet::upstream_set(SegIndex r, double d_a) const {
  std::vector<UpstreamEntry> result;
  if (!(d_a > 0.0)) return result;
  // Reverse search from entrance(r). Any member has dist >= dist(x, entrance(r)) + len(r)/2
  // and distI >= 1, so vertices beyond d_a can never contribute.
  const double half_r = length(r) / 2.0;
  const double limit = d_a - half_r;
  std::unordered_map<VertexIndex, std::pair<double, int>> best;
  MinQueue queue;
  const VertexIndex target = entrance_[r];
  best[target] = {0.0, 1};
  queue.push({0.0, 1, target});
  while (!queue.empty()) {
    const QueueItem item = queue.top();
    queue.pop();
    const auto settled = best[item.vertex];
    if (item.distance != settled.first || item.vertices != settled.second) continue;
    for (SegIndex u : entering_vertex_[item.vertex]) {
      if (u == r) continue;
      const double d = length(u) / 2.0 + item.distance + half_r;
      const double product = d * item.vertices;
      if (product <= d_a) result.push_back({u, d, item.vertices, product});
    }
    for (SegIndex s : entering_vertex_[item.vertex]) {
      const VertexIndex prev = entrance_[s];
      const double d = item.distance + length(s);
      const int v = item.vertices + 1;
      if (d > limit) continue;
      auto it = best.find(prev);
      if (it == best.end() || better(d, v, it->second.first, it->second.second)) {
        best[prev] = {d, v};
        queue.push({d, v, prev});
      }
    }
  }
  std::sort(result.begin(), result.end(), [](const UpstreamEntry& a, const UpstreamEntry& b) {
    return std::tie(a.dist_product, a.segment) < std::tie(b.dist_product, b.segment);
  });
  return result;
}

std::vector<std::vector<UpstreamEntry>> upstream_sets(const RoadNet& net, double d_a) {
  std::vector<std::vector<UpstreamEntry>> out(net.size());
  for (SegIndex r = 0; r < net.size(); ++r) out[r] = net.upstream_set(r, d_a);
  return out;
}

RoadNet road_net_from_json(const nlohmann::json& doc) {
  try {
    const nlohmann::json* seg_array = &doc;
    std::optional<std::vector<std::string>> vertices;
    GeoOrigin origin;
    if (doc.is_object()) {
      if (!doc.contains("segments")) throw FormatError("road net JSON lacks 'segments'");
      seg_array = &doc.at("segments");
      if (doc.contains("vertices")) vertices = doc.at("vertices").get<std::vector<std::string>>();
      if (doc.contains("origin")) {
        origin.lon = doc.at("origin").at("lon").get<double>();
        origin.lat = doc.at("origin").at("lat").get<double>();
      }
    }
    if (!seg_array->is_array()) throw FormatError("road net segments must be an array");
    std::vector<RoadSegment> segments;
    segments.reserve(seg_array->size());
    for (const auto& item : *seg_array) {
      RoadSegment seg;
      const auto& id = item.at("id");
      seg.id = id.is_string() ? id.get<std::string>() : id.dump();
      for (const auto& p : item.at("polyline")) {
        if (!p.is_array() || p.size() != 2) throw FormatError("polyline points must be [x, y]");
        seg.polyline.push_back({p[0].get<double>(), p[1].get<double>()});
      }
      const auto& ent = item.at("entrance");
      const auto& ex = item.at("exit");
      seg.entrance = ent.is_string() ? ent.get<std::string>() : ent.dump();
      seg.exit = ex.is_string() ? ex.get<std::string>() : ex.dump();
      segments.push_back(std::move(seg));
    }
    return RoadNet(std::move(segments), std::move(vertices), origin);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed road net JSON: ") + e.what());
  }
}

nlohmann::json road_net_to_json(const RoadNet& net) {
  nlohmann::json segs = nlohmann::json::array();
  for (const RoadSegment& seg : net.segments()) {
    nlohmann::json poly = nlohmann::json::array();
    for (const Point& p : seg.polyline) poly.push_back({p.x, p.y});
    segs.push_back({{"id", seg.id}, {"polyline", poly}, {"entrance", seg.entrance}, {"exit", seg.exit}});
  }
  return {{"origin", {{"lon", net.origin().lon}, {"lat", net.origin().lat}}}, {"segments", segs}};
}

RoadNet load_road_net(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open road net '" + path.string() + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("cannot parse road net '" + path.string() + "': " + e.what());
  }
  return road_net_from_json(doc);
}

void save_road_net(const RoadNet& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << road_net_to_json(net).dump(1) << '\n';
}

}  // namespace speedfill
