#include "speedfill/speed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "speedfill/errors.hpp"

namespace speedfill {

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::vacant: return "vacant";
    case Provenance::measured: return "measured";
    case Provenance::completed: return "completed";
    case Provenance::fallback: return "fallback";
    case Provenance::initialized: return "initialized";
  }
  return "vacant";
}

Provenance provenance_from_string(std::string_view text) {
  for (Provenance p : {Provenance::vacant, Provenance::measured, Provenance::completed, Provenance::fallback,
                       Provenance::initialized})
    if (to_string(p) == text) return p;
  throw FormatError("unknown provenance '" + std::string(text) + "'");
}

SpeedTable::SpeedTable(std::size_t segment_count, int interval_count)
    : segments_(segment_count),
      intervals_(interval_count),
      values_(segment_count * static_cast<std::size_t>(std::max(interval_count, 0)),
              std::numeric_limits<double>::quiet_NaN()),
      prov_(values_.size(), Provenance::vacant) {}

void SpeedTable::set(SegIndex s, int ordinal, double speed, Provenance p) {
  if (!std::isfinite(speed) || speed < 0.0) throw ValidationError("speeds must be finite and non-negative");
  if (p == Provenance::vacant) {
    clear(s, ordinal);
    return;
  }
  values_[slot(s, ordinal)] = speed;
  prov_[slot(s, ordinal)] = p;
}

void SpeedTable::clear(SegIndex s, int ordinal) {
  values_[slot(s, ordinal)] = std::numeric_limits<double>::quiet_NaN();
  prov_[slot(s, ordinal)] = Provenance::vacant;
}

std::span<const double> SpeedTable::slice(SegIndex s, int first, int last) const {
  if (first < 1 || last > intervals_ || last < first) return {};
  return std::span<const double>(values_).subspan(slot(s, first), static_cast<std::size_t>(last - first + 1));
}

std::size_t SpeedTable::vacancies(int ordinal) const {
  std::size_t count = 0;
  for (SegIndex s = 0; s < segments_; ++s)
    if (!has(s, ordinal)) ++count;
  return count;
}

bool operator==(const SpeedTable& a, const SpeedTable& b) {
  if (a.segments_ != b.segments_ || a.intervals_ != b.intervals_ || a.prov_ != b.prov_) return false;
  for (std::size_t i = 0; i < a.values_.size(); ++i) {
    const double x = a.values_[i];
    const double y = b.values_[i];
    if (std::isnan(x) != std::isnan(y)) return false;
    if (!std::isnan(x) && x != y) return false;
  }
  return true;
}

std::vector<Trace> build_traces(std::span<const MatchedRecord> matched) {
  std::map<std::string, std::vector<TracePoint>> grouped;
  for (const MatchedRecord& m : matched)
    grouped[m.vehicle_id].push_back({m.timestamp, {m.segment, m.offset}, m.speed});
  std::vector<Trace> traces;
  traces.reserve(grouped.size());
  for (auto& [id, points] : grouped) {
    std::stable_sort(points.begin(), points.end(),
                     [](const TracePoint& a, const TracePoint& b) { return a.timestamp < b.timestamp; });
    auto last = std::unique(points.begin(), points.end(), [](const TracePoint& a, const TracePoint& b) {
      return a.timestamp == b.timestamp;
    });
    points.erase(last, points.end());
    traces.push_back({id, std::move(points)});
  }
  return traces;
}

namespace {

// Calls sink(pair) for every usable consecutive pair whose arrival lies in the grid.
template <typename Sink>
void for_each_pair(const Trace& trace, const IntervalGrid& grid, const RoadNet& net, double v_max, int only_ordinal,
                   Sink&& sink) {
  for (std::size_t i = 1; i < trace.points.size(); ++i) {
    const TracePoint& a = trace.points[i - 1];
    const TracePoint& b = trace.points[i];
    const int j = grid.ordinal(b.timestamp);
    if (j == 0 || (only_ordinal != 0 && j != only_ordinal)) continue;
    const double dt = b.timestamp - a.timestamp;
    if (!(dt > 0.0)) continue;
    const auto d = net.network_distance(a.position, b.position, v_max * dt);
    if (!d) continue;
    sink(j, PairSpeed{b.position.segment, *d / dt});
  }
}

}  // namespace

std::vector<PairSpeed> segment_pair_speeds(const Trace& trace, const IntervalGrid& grid, int ordinal,
                                           const RoadNet& net, double v_max) {
  std::vector<PairSpeed> out;
  for_each_pair(trace, grid, net, v_max, ordinal, [&](int, PairSpeed p) { out.push_back(p); });
  return out;
}

double travel_speed_covered(SegIndex segment, int ordinal, std::span<const Trace> traces,
                            const CoverageTable& coverage, const IntervalGrid& grid, const RoadNet& net,
                            double v_max) {
  if (!coverage.is_covered(segment, ordinal))
    throw NotCovered("segment '" + net.segment(segment).id + "' is not covered in interval " +
                     std::to_string(ordinal));
  double sum = 0.0;
  std::size_t count = 0;
  for (const Trace& trace : traces) {
    for (const PairSpeed& p : segment_pair_speeds(trace, grid, ordinal, net, v_max)) {
      if (p.segment != segment) continue;
      sum += p.speed;
      ++count;
    }
    for (const TracePoint& pt : trace.points) {
      if (pt.position.segment != segment || grid.ordinal(pt.timestamp) != ordinal) continue;
      sum += pt.speed;
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

Measurements measure_speeds(std::span<const Trace> traces, const IntervalGrid& grid, const RoadNet& net, int n_thr,
                            double v_max) {
  Measurements m{CoverageTable(net.size(), grid.count(), n_thr), SpeedTable(net.size(), grid.count())};
  const std::size_t cells = net.size() * static_cast<std::size_t>(grid.count());
  std::vector<double> sums(cells, 0.0);
  std::vector<std::size_t> counts(cells, 0);
  auto slot = [&](SegIndex s, int j) { return s * static_cast<std::size_t>(grid.count()) + (j - 1); };

  for (const Trace& trace : traces) {
    for (const TracePoint& pt : trace.points) {
      const int j = grid.ordinal(pt.timestamp);
      if (j == 0) continue;
      m.coverage.add(pt.position.segment, j);
      sums[slot(pt.position.segment, j)] += pt.speed;
      ++counts[slot(pt.position.segment, j)];
    }
    for_each_pair(trace, grid, net, v_max, 0, [&](int j, PairSpeed p) {
      sums[slot(p.segment, j)] += p.speed;
      ++counts[slot(p.segment, j)];
    });
  }
  for (SegIndex s = 0; s < net.size(); ++s)
    for (int j = 1; j <= grid.count(); ++j)
      if (m.coverage.is_covered(s, j)) m.speeds.set(s, j, sums[slot(s, j)] / counts[slot(s, j)], Provenance::measured);
  return m;
}

}  // namespace speedfill
