#include "speedfill/mapmatch.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <thread>

#include "speedfill/errors.hpp"

namespace speedfill {

GridIndex::GridIndex(const RoadNet& net, double cell_size, double d_min) : cell_size_(cell_size) {
  if (!(cell_size > 0.0)) throw ValidationError("grid cell size must be positive");
  const BoundingBox box = net.bounds();
  origin_ = {box.min_x - d_min, box.max_y + d_min};
  const double width = box.max_x - box.min_x + 2.0 * d_min;
  const double height = box.max_y - box.min_y + 2.0 * d_min;
  cols_ = std::max(1, static_cast<int>(std::ceil(width / cell_size)));
  rows_ = std::max(1, static_cast<int>(std::ceil(height / cell_size)));
  cells_.assign(static_cast<std::size_t>(rows_) * cols_, {});

  for (SegIndex s = 0; s < net.size(); ++s) {
    const auto& poly = net.segment(s).polyline;
    for (std::size_t i = 1; i < poly.size(); ++i) {
      const double x0 = std::min(poly[i - 1].x, poly[i].x) - d_min;
      const double x1 = std::max(poly[i - 1].x, poly[i].x) + d_min;
      const double y0 = std::min(poly[i - 1].y, poly[i].y) - d_min;
      const double y1 = std::max(poly[i - 1].y, poly[i].y) + d_min;
      const auto [r0, c0] = cell_of({x0, y1});
      const auto [r1, c1] = cell_of({x1, y0});
      for (int r = std::max(0, r0); r <= std::min(rows_ - 1, r1); ++r) {
        for (int c = std::max(0, c0); c <= std::min(cols_ - 1, c1); ++c) {
          auto& bucket = cells_[static_cast<std::size_t>(r) * cols_ + c];
          if (bucket.empty() || bucket.back() != s) bucket.push_back(s);
        }
      }
    }
  }
  for (auto& bucket : cells_) {
    std::sort(bucket.begin(), bucket.end());
    bucket.erase(std::unique(bucket.begin(), bucket.end()), bucket.end());
  }
}

std::pair<int, int> GridIndex::cell_of(Point p) const {
  const int row = static_cast<int>(std::floor((origin_.y - p.y) / cell_size_));
  const int col = static_cast<int>(std::floor((p.x - origin_.x) / cell_size_));
  return {row, col};
}

std::span<const SegIndex> GridIndex::cell(int row, int col) const {
  if (row < 0 || col < 0 || row >= rows_ || col >= cols_) return {};
  return cells_[static_cast<std::size_t>(row) * cols_ + col];
}

std::vector<SegIndex> GridIndex::candidates_near(Point p) const {
  const auto [row, col] = cell_of(p);
  std::vector<SegIndex> out;
  for (int dr = -1; dr <= 1; ++dr)
    for (int dc = -1; dc <= 1; ++dc) {
      const auto bucket = cell(row + dr, col + dc);
      out.insert(out.end(), bucket.begin(), bucket.end());
    }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

MatchOutcome nearest_segment(Point p, std::span<const SegIndex> candidates, const RoadNet& net,
                             double d_min) {
  MatchOutcome best;
  for (SegIndex s : candidates) {
    const auto proj = project_onto_polyline(p, net.segment(s).polyline);
    if (proj.distance > d_min) continue;
    if (!best || proj.distance < best->distance ||
        (proj.distance == best->distance && s < best->segment)) {
      best = MatchResult{s, proj.offset, proj.distance};
    }
  }
  return best;
}

MatchOutcome match_unrestricted(Point p, const GridIndex& index, const RoadNet& net, double d_min) {
  const auto candidates = index.candidates_near(p);
  return nearest_segment(p, candidates, net, d_min);
}

std::vector<SegIndex> tracking_candidates(SegIndex last, const RoadNet& net, int max_depth) {
  std::vector<SegIndex> out{last};
  std::vector<SegIndex> frontier{last};
  for (int depth = 0; depth < max_depth && !frontier.empty(); ++depth) {
    std::vector<SegIndex> next;
    for (SegIndex s : frontier) {
      for (SegIndex o : net.outward(s)) {
        if (std::find(out.begin(), out.end(), o) == out.end()) {
          out.push_back(o);
          next.push_back(o);
        }
      }
    }
    frontier = std::move(next);
  }
  std::sort(out.begin(), out.end());
  return out;
}

MatchOutcome match_point(Point p, double t, VehicleState& state, const GridIndex& index,
                         const RoadNet& net, const MatchConfig& config) {
  if (t < state.last_timestamp) throw std::invalid_argument("match_point: timestamp went backwards");
  MatchOutcome result;
  if (state.last_segment && t - state.last_timestamp < config.gap_threshold) {
    const auto candidates = tracking_candidates(*state.last_segment, net, config.max_depth);
    result = nearest_segment(p, candidates, net, config.d_min);
  }
  if (!result) result = match_unrestricted(p, index, net, config.d_min);
  if (result) {
    state.last_segment = result->segment;
    state.last_timestamp = t;
  }
  return result;
}

MatchSummary match_records(std::span<const Record> records, const RoadNet& net, const MatchConfig& config,
                           unsigned jobs) {
  const GridIndex index(net, config.cell_size, config.d_min);

  // Group by vehicle (ordered by id) with time-sorted records.
  std::map<std::string, std::vector<std::size_t>> by_vehicle;
  for (std::size_t i = 0; i < records.size(); ++i) by_vehicle[records[i].vehicle_id].push_back(i);
  std::vector<std::vector<std::size_t>*> groups;
  for (auto& [id, idx] : by_vehicle) {
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return records[a].timestamp < records[b].timestamp; });
    groups.push_back(&idx);
  }

  std::vector<std::vector<MatchedRecord>> per_group(groups.size());
  std::vector<std::size_t> outliers(groups.size(), 0);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t g = begin; g < end; ++g) {
      VehicleState state;
      for (std::size_t i : *groups[g]) {
        const Record& rec = records[i];
        const auto m = match_point(rec.position, rec.timestamp, state, index, net, config);
        if (!m) {
          ++outliers[g];
          continue;
        }
        per_group[g].push_back({rec.vehicle_id, rec.timestamp, m->segment, m->offset, rec.speed});
      }
    }
  };

  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(groups.size(), 1))));
  if (jobs == 1) {
    work(0, groups.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (groups.size() + jobs - 1) / jobs;
    for (unsigned j = 0; j < jobs; ++j) {
      const std::size_t b = j * chunk;
      const std::size_t e = std::min(groups.size(), b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }

  MatchSummary summary;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    summary.outliers += outliers[g];
    for (auto& m : per_group[g]) summary.matched.push_back(std::move(m));
  }
  return summary;
}

}  // namespace speedfill
