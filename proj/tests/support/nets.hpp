#pragma once

#include <algorithm>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "speedfill/roadnet.hpp"

namespace testsupport {

inline std::string seg_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "s%05zu", i);
  return buf;
}

inline speedfill::RoadSegment straight(const std::string& id, speedfill::Point a, speedfill::Point b,
                                       const std::string& from, const std::string& to) {
  speedfill::RoadSegment s;
  s.id = id;
  s.polyline = {a, b};
  s.entrance = from;
  s.exit = to;
  return s;
}

/// Chain v0 -> v1 -> ... along the x axis with the given segment lengths.
inline speedfill::RoadNet chain(const std::vector<double>& lengths) {
  std::vector<speedfill::RoadSegment> segs;
  double x = 0.0;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    segs.push_back(straight(seg_id(i), {x, 0.0}, {x + lengths[i], 0.0}, "v" + std::to_string(i),
                            "v" + std::to_string(i + 1)));
    x += lengths[i];
  }
  return speedfill::RoadNet(std::move(segs));
}

/// Random directed graph on scattered vertices; both directions of a street
/// appear independently, so cycles are common.
inline speedfill::RoadNet random_net(std::mt19937_64& rng, int vertices, int segments, double extent = 2000.0) {
  std::uniform_real_distribution<double> coord(0.0, extent);
  std::uniform_int_distribution<int> pick(0, vertices - 1);
  std::vector<speedfill::Point> at(static_cast<std::size_t>(vertices));
  for (auto& p : at) p = {coord(rng), coord(rng)};
  std::vector<speedfill::RoadSegment> segs;
  std::vector<std::pair<int, int>> used;
  int guard = 0;
  while (static_cast<int>(segs.size()) < segments && guard++ < segments * 50) {
    const int a = pick(rng);
    const int b = pick(rng);
    if (a == b || std::find(used.begin(), used.end(), std::pair{a, b}) != used.end()) continue;
    if (speedfill::distance(at[a], at[b]) < 1.0) continue;
    used.push_back({a, b});
    segs.push_back(straight(seg_id(segs.size()), at[a], at[b], "v" + std::to_string(a), "v" + std::to_string(b)));
  }
  return speedfill::RoadNet(std::move(segs));
}

/// Shortest vertex-to-vertex path by exhaustive enumeration of simple paths.
/// Returns {distance, vertices on the path} with ties broken by fewer vertices.
struct BrutePath {
  double distance = std::numeric_limits<double>::infinity();
  int vertices = 0;
};

inline BrutePath brute_vertex_path(const speedfill::RoadNet& net, speedfill::VertexIndex from,
                                   speedfill::VertexIndex to) {
  BrutePath best;
  std::vector<char> seen(net.vertex_count(), 0);
  std::function<void(speedfill::VertexIndex, double, int)> walk = [&](speedfill::VertexIndex v, double d, int count) {
    if (v == to) {
      if (d < best.distance - 1e-9 || (std::abs(d - best.distance) <= 1e-9 && count < best.vertices))
        best = {d, count};
      return;
    }
    seen[v] = 1;
    for (speedfill::SegIndex s = 0; s < net.size(); ++s)
      if (net.entrance_vertex(s) == v && !seen[net.exit_vertex(s)]) walk(net.exit_vertex(s), d + net.length(s), count + 1);
    seen[v] = 0;
  };
  walk(from, 0.0, 1);
  return best;
}

inline double brute_distance(const speedfill::RoadNet& net, speedfill::NetPosition a, speedfill::NetPosition b) {
  if (a.segment == b.segment && b.offset >= a.offset) return b.offset - a.offset;
  const BrutePath p = brute_vertex_path(net, net.exit_vertex(a.segment), net.entrance_vertex(b.segment));
  return net.length(a.segment) - a.offset + p.distance + b.offset;
}

}  // namespace testsupport
