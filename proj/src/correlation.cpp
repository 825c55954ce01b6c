#include "speedfill/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_set>

#include "speedfill/errors.hpp"

namespace speedfill {

namespace {

struct Moments {
  double mean_x = 0.0;
  double mean_y = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
};

Moments moments(std::span<const double> x, std::span<const double> y) {
  Moments m;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    m.mean_x += x[i];
    m.mean_y += y[i];
  }
  m.mean_x /= n;
  m.mean_y /= n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - m.mean_x;
    const double dy = y[i] - m.mean_y;
    m.sxx += dx * dx;
    m.syy += dy * dy;
    m.sxy += dx * dy;
  }
  return m;
}

// Population-free ratio: the (n-1) factors of covariance and both deviations cancel.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  const Moments m = moments(x, y);
  if (!(m.sxx > 0.0) || !(m.syy > 0.0)) return std::nullopt;
  const double c = m.sxy / std::sqrt(m.sxx * m.syy);
  return std::clamp(c, -1.0, 1.0);
}

std::span<const double> checked_slice(const SpeedTable& table, SegIndex s, int first, int last) {
  if (first < 1 || last > table.interval_count())
    throw InsufficientHistory("window [" + std::to_string(first) + ", " + std::to_string(last) +
                              "] falls outside intervals 1.." + std::to_string(table.interval_count()));
  std::string missing;
  for (int j = first; j <= last; ++j) {
    if (table.has(s, j)) continue;
    if (!missing.empty()) missing += ',';
    missing += std::to_string(j);
  }
  if (!missing.empty())
    throw VacantEntry("segment index " + std::to_string(s) + " is vacant at intervals " + missing);
  return table.slice(s, first, last);
}

}  // namespace

double cross_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("cross_correlation: slices differ in length");
  if (x.size() < 2) throw std::invalid_argument("cross_correlation: need at least two samples");
  const auto c = pearson(x, y);
  if (!c) throw DegenerateSeries("cross_correlation: constant series");
  return *c;
}

std::optional<double> try_cross_correlation(std::span<const double> x, std::span<const double> y) noexcept {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  return pearson(x, y);
}

LaggedWindow previous_window(int n, int w, int k) {
  return {n - k - w, n - k - 1, n - w, n - 1};
}

LaggedWindow current_window(int n, int w, int k) {
  return {n - k - w + 1, n - k, n - w + 1, n};
}

double c_pre(SegIndex ri, SegIndex r, int n, int w, int k, const SpeedTable& table) {
  const LaggedWindow win = previous_window(n, w, k);
  const auto x = checked_slice(table, ri, win.contributor_first, win.contributor_last);
  const auto y = checked_slice(table, r, win.target_first, win.target_last);
  return cross_correlation(x, y);
}

double c_now(SegIndex ri, SegIndex r, int n, int w, int k, const SpeedTable& table, double candidate) {
  const LaggedWindow win = current_window(n, w, k);
  const auto x = checked_slice(table, ri, win.contributor_first, win.contributor_last);
  std::vector<double> y(static_cast<std::size_t>(w));
  if (w > 1) {
    const auto known = checked_slice(table, r, win.target_first, win.target_last - 1);
    std::copy(known.begin(), known.end(), y.begin());
  }
  y.back() = candidate;
  return cross_correlation(x, y);
}

std::optional<LagEntry> LagTable::get(SegIndex u, SegIndex r) const {
  const auto it = entries_.find(key(u, r));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::vector<LagTable::Row> LagTable::rows() const {
  std::vector<Row> out;
  out.reserve(entries_.size());
  for (const auto& [k, e] : entries_)
    out.push_back({static_cast<SegIndex>(k & 0xffffffffu), static_cast<SegIndex>(k >> 32), e});
  std::sort(out.begin(), out.end(), [](const Row& a, const Row& b) {
    return a.r != b.r ? a.r < b.r : a.u < b.u;
  });
  return out;
}

std::vector<std::vector<Visit>> build_visits(std::span<const Trace> traces) {
  std::vector<std::vector<Visit>> out(traces.size());
  for (std::size_t t = 0; t < traces.size(); ++t) {
    const auto& pts = traces[t].points;
    for (std::uint32_t i = 0; i < pts.size(); ++i) {
      auto& visits = out[t];
      if (!visits.empty() && visits.back().segment == pts[i].position.segment)
        visits.back().last = i;
      else
        visits.push_back({pts[i].position.segment, i, i});
    }
  }
  return out;
}

namespace {

struct TimeRange {
  double begin;
  double end;  // exclusive
};

TimeRange window_range(int window_end, int w, const IntervalGrid& grid) {
  if (w < 2) throw std::invalid_argument("window length must be at least 2");
  const int first = std::max(1, window_end - w + 1);
  return {grid.begin(first), grid.end(window_end)};
}

// Travel time cp(u) -> cp(r) implied by one vehicle's passage from visit `uv` to visit `rv`.
std::optional<double> travel_sample(const Trace& trace, const Visit& uv, const Visit& rv, TimeRange range,
                                    const RoadNet& net, double path_distance, const LagConfig& config) {
  const auto& pts = trace.points;
  const double half_r = net.length(rv.segment) / 2.0;
  std::optional<std::uint32_t> arrive;
  double best = std::numeric_limits<double>::infinity();
  for (std::uint32_t i = rv.first; i <= rv.last; ++i) {
    if (pts[i].timestamp < range.begin || pts[i].timestamp >= range.end) continue;
    const double gap = std::abs(pts[i].position.offset - half_r);
    if (gap < best) {
      best = gap;
      arrive = i;
    }
  }
  if (!arrive) return std::nullopt;

  const double half_u = net.length(uv.segment) / 2.0;
  std::uint32_t depart = uv.first;
  best = std::numeric_limits<double>::infinity();
  for (std::uint32_t i = uv.first; i <= uv.last; ++i) {
    const double gap = std::abs(pts[i].position.offset - half_u);
    if (gap <= best) {
      best = gap;
      depart = i;
    }
  }

  const double dt = pts[*arrive].timestamp - pts[depart].timestamp;
  if (!(dt > 0.0) || dt > config.max_elapsed) return std::nullopt;
  const auto d = net.network_distance(pts[depart].position, pts[*arrive].position, config.v_max * dt);
  if (!d || !(*d > 0.0)) return std::nullopt;
  return path_distance / (*d / dt);
}

// Index of the first visit that may hold a record at or after `t`.
std::size_t first_visit_from(const Trace& trace, const std::vector<Visit>& visits, double t) {
  const auto it = std::partition_point(visits.begin(), visits.end(), [&](const Visit& v) {
    return trace.points[v.last].timestamp < t;
  });
  return static_cast<std::size_t>(it - visits.begin());
}

int lag_from_travel_time(double travel_time, double interval_length) {
  return std::max(0, static_cast<int>(std::floor(travel_time / interval_length + 1e-9)));
}

}  // namespace

LagEstimate estimate_lag(SegIndex u, SegIndex r, int window_end, int w, const IntervalGrid& grid,
                         std::span<const Trace> traces, const RoadNet& net, const LagConfig& config) {
  const auto path = net.segment_path(u, r);
  if (!path || u == r)
    throw Unreachable("no directed path from '" + net.segment(u).id + "' to '" + net.segment(r).id + "'");
  const TimeRange range = window_range(window_end, w, grid);
  const int max_back = path->intersections + config.extra_hops;
  const auto visits = build_visits(traces);

  double sum = 0.0;
  int count = 0;
  for (std::size_t t = 0; t < traces.size(); ++t) {
    const auto& vs = visits[t];
    for (std::size_t vi = first_visit_from(traces[t], vs, range.begin); vi < vs.size(); ++vi) {
      if (traces[t].points[vs[vi].first].timestamp >= range.end) break;
      if (vs[vi].segment != r) continue;
      std::optional<double> sample;
      for (int back = 1; back <= max_back && static_cast<int>(vi) - back >= 0; ++back) {
        const Visit& prev = vs[vi - back];
        if (prev.segment == r) break;
        if (prev.segment != u) continue;
        sample = travel_sample(traces[t], prev, vs[vi], range, net, path->distance, config);
        break;
      }
      if (sample) {
        sum += *sample;
        ++count;
        break;
      }
    }
  }
  if (count == 0)
    throw NoTraversals("no vehicle went from '" + net.segment(u).id + "' to '" + net.segment(r).id +
                       "' in the window");
  const double mean = sum / count;
  return {lag_from_travel_time(mean, grid.length()), count, mean};
}

LagTable build_lag_table(int window_end, int w, const IntervalGrid& grid, std::span<const Trace> traces,
                         std::span<const std::vector<Visit>> visits, const RoadNet& net,
                         std::span<const std::vector<UpstreamEntry>> upstream, const LagTable* previous,
                         const LagConfig& config) {
  const TimeRange range = window_range(window_end, w, grid);

  // Per target r: upstream entries sorted by segment for lookup.
  std::vector<std::vector<const UpstreamEntry*>> lookup(upstream.size());
  int max_back = 0;
  for (std::size_t r = 0; r < upstream.size(); ++r) {
    for (const UpstreamEntry& e : upstream[r]) {
      lookup[r].push_back(&e);
      max_back = std::max(max_back, e.intersections + config.extra_hops);
    }
    std::sort(lookup[r].begin(), lookup[r].end(),
              [](const UpstreamEntry* a, const UpstreamEntry* b) { return a->segment < b->segment; });
  }
  auto find_entry = [&](SegIndex r, SegIndex u) -> const UpstreamEntry* {
    const auto& list = lookup[r];
    const auto it = std::lower_bound(list.begin(), list.end(), u,
                                     [](const UpstreamEntry* e, SegIndex s) { return e->segment < s; });
    return it != list.end() && (*it)->segment == u ? *it : nullptr;
  };

  struct Accumulator {
    double sum = 0.0;
    int count = 0;
  };
  std::unordered_map<std::uint64_t, Accumulator> acc;
  auto key = [](SegIndex u, SegIndex r) { return (std::uint64_t{r} << 32) | u; };

  std::unordered_set<std::uint64_t> sampled;
  for (std::size_t t = 0; t < traces.size(); ++t) {
    const auto& vs = visits[t];
    sampled.clear();
    for (std::size_t vi = first_visit_from(traces[t], vs, range.begin); vi < vs.size(); ++vi) {
      if (traces[t].points[vs[vi].first].timestamp >= range.end) break;
      const SegIndex r = vs[vi].segment;
      if (r >= lookup.size() || lookup[r].empty()) continue;
      for (int back = 1; back <= max_back && static_cast<int>(vi) - back >= 0; ++back) {
        const Visit& prev = vs[vi - back];
        if (prev.segment == r) break;
        const UpstreamEntry* e = find_entry(r, prev.segment);
        if (!e || back > e->intersections + config.extra_hops) continue;
        const std::uint64_t k = key(prev.segment, r);
        if (sampled.contains(k)) continue;
        // Nearest earlier visit to u only; older visits of the same u are not considered.
        bool nearer_u = false;
        for (int b2 = 1; b2 < back; ++b2)
          if (vs[vi - b2].segment == prev.segment) nearer_u = true;
        if (nearer_u) continue;
        const auto sample = travel_sample(traces[t], prev, vs[vi], range, net, e->distance, config);
        if (!sample) continue;
        acc[k].sum += *sample;
        ++acc[k].count;
        sampled.insert(k);
      }
    }
  }

  LagTable table(window_end, w);
  for (std::size_t r = 0; r < upstream.size(); ++r) {
    for (const UpstreamEntry& e : upstream[r]) {
      const SegIndex rr = static_cast<SegIndex>(r);
      const auto it = acc.find(key(e.segment, rr));
      if (it != acc.end()) {
        table.set(e.segment, rr,
                  {lag_from_travel_time(it->second.sum / it->second.count, grid.length()), it->second.count,
                   LagSource::tracked});
        continue;
      }
      if (previous) {
        if (const auto old = previous->get(e.segment, rr)) {
          table.set(e.segment, rr, {old->k, 0, LagSource::carried});
          continue;
        }
      }
      table.set(e.segment, rr,
                {lag_from_travel_time(e.distance / config.free_flow_speed, grid.length()), 0, LagSource::free_flow});
    }
  }
  return table;
}

std::vector<double> stationarity_profile(const SpeedTable& table, SegIndex segment,
                                         std::span<const int> window_lengths) {
  std::vector<double> out;
  out.reserve(window_lengths.size());
  for (int w : window_lengths) {
    double total = 0.0;
    int windows = 0;
    for (int end = w; w >= 2 && end <= table.interval_count(); ++end) {
      bool full = true;
      for (int j = end - w + 1; j <= end && full; ++j) full = table.has(segment, j);
      if (!full) continue;
      const auto s = table.slice(segment, end - w + 1, end);
      double mean = 0.0;
      for (double v : s) mean += v;
      mean /= w;
      double ss = 0.0;
      for (double v : s) ss += (v - mean) * (v - mean);
      total += std::sqrt(ss / (w - 1));
      ++windows;
    }
    out.push_back(windows > 0 ? total / windows : std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

}  // namespace speedfill
