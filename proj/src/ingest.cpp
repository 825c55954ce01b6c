#include "speedfill/ingest.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "speedfill/errors.hpp"
#include "speedfill/text.hpp"

namespace speedfill {

namespace {

constexpr double kEarthRadius = 6378137.0;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

LocalProjection::LocalProjection(GeoOrigin origin) : origin_(origin) {
  const double rad = std::numbers::pi / 180.0;
  meters_per_deg_lat_ = kEarthRadius * rad;
  meters_per_deg_lon_ = kEarthRadius * rad * std::cos(origin.lat * rad);
}

Point LocalProjection::forward(double lon, double lat) const {
  return {(lon - origin_.lon) * meters_per_deg_lon_, (lat - origin_.lat) * meters_per_deg_lat_};
}

std::pair<double, double> LocalProjection::inverse(Point p) const {
  return {origin_.lon + p.x / meters_per_deg_lon_, origin_.lat + p.y / meters_per_deg_lat_};
}

SpeedUnit parse_speed_unit(const std::string& text) {
  if (text == "mps" || text == "m/s") return SpeedUnit::meters_per_second;
  if (text == "kmh" || text == "km/h") return SpeedUnit::kilometers_per_hour;
  throw ValidationError("unknown speed unit '" + text + "' (expected mps or kmh)");
}

ParseResult parse_records(std::istream& in, const ParseOptions& options) {
  ParseResult result;
  const LocalProjection projection(options.origin);
  const double unit_scale = options.unit == SpeedUnit::kilometers_per_hour ? 1.0 / 3.6 : 1.0;

  std::string line;
  bool saw_header = false;
  std::size_t line_no = 0;
  std::set<std::pair<std::string, double>> seen;

  auto reject = [&](const std::string& why) {
    ++result.skipped;
    if (result.diagnostics.size() < options.max_diagnostics)
      result.diagnostics.push_back("line " + std::to_string(line_no) + ": " + why);
  };

  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (!saw_header) {
      if (view.empty()) continue;
      const auto header = split_csv(view);
      const std::vector<std::string_view> expected{"vehicle_id", "timestamp", "lon", "lat", "speed"};
      bool ok = header.size() == expected.size();
      for (std::size_t i = 0; ok && i < expected.size(); ++i) ok = trim(header[i]) == expected[i];
      if (!ok) throw FormatError("record CSV must start with header vehicle_id,timestamp,lon,lat,speed");
      saw_header = true;
      continue;
    }
    if (view.empty()) continue;
    const auto fields = split_csv(view);
    if (fields.size() != 5) {
      reject("expected 5 fields, got " + std::to_string(fields.size()));
      continue;
    }
    const std::string_view vehicle = trim(fields[0]);
    const auto timestamp = parse_double(trim(fields[1]));
    const auto lon = parse_double(trim(fields[2]));
    const auto lat = parse_double(trim(fields[3]));
    const auto speed = parse_double(trim(fields[4]));
    if (vehicle.empty()) {
      reject("empty vehicle id");
      continue;
    }
    if (!timestamp || !lon || !lat || !speed) {
      reject("non-numeric field");
      continue;
    }
    if (!std::isfinite(*timestamp) || !std::isfinite(*lon) || !std::isfinite(*lat)) {
      reject("non-finite value");
      continue;
    }
    if (!std::isfinite(*speed) || *speed < 0.0) {
      reject("speed must be finite and non-negative");
      continue;
    }
    if (!seen.emplace(std::string(vehicle), *timestamp).second) {
      ++result.duplicates;
      continue;
    }
    result.records.push_back(
        {std::string(vehicle), *timestamp, projection.forward(*lon, *lat), *speed * unit_scale});
  }
  return result;
}

IntervalGrid::IntervalGrid(double start_time, double length_seconds, int count)
    : start_(start_time), length_(length_seconds), count_(count) {
  if (!(length_seconds > 0.0)) throw ValidationError("interval length T must be positive");
  if (count < 0) throw ValidationError("interval count must be non-negative");
}

int IntervalGrid::ordinal(double t) const {
  if (t < start_) return 0;
  const double k = std::floor((t - start_) / length_);
  if (k >= count_) return 0;
  int j = static_cast<int>(k) + 1;
  // Guard the half-open boundary against rounding in the division.
  if (t >= end(j) && j < count_) ++j;
  if (t < begin(j)) --j;
  return j;
}

IntervalGrid IntervalGrid::covering(double start_time, double last_time, double length_seconds) {
  if (!(length_seconds > 0.0)) throw ValidationError("interval length T must be positive");
  const int count =
      last_time < start_time ? 0 : static_cast<int>(std::floor((last_time - start_time) / length_seconds)) + 1;
  return IntervalGrid(start_time, length_seconds, count);
}

CoverageTable::CoverageTable(std::size_t segment_count, int interval_count, int n_thr)
    : segments_(segment_count),
      intervals_(interval_count),
      n_thr_(n_thr),
      counts_(segment_count * static_cast<std::size_t>(std::max(interval_count, 0)), 0) {
  if (n_thr < 1) throw ValidationError("N_thr must be at least 1");
}

void CoverageTable::add(SegIndex segment, int ordinal, int count) {
  counts_[segment * static_cast<std::size_t>(intervals_) + (ordinal - 1)] += count;
}

int CoverageTable::count(SegIndex segment, int ordinal) const {
  return counts_[segment * static_cast<std::size_t>(intervals_) + (ordinal - 1)];
}

std::size_t CoverageTable::coverage_count(int ordinal) const {
  std::size_t covered = 0;
  for (SegIndex s = 0; s < segments_; ++s)
    if (is_covered(s, ordinal)) ++covered;
  return covered;
}

}  // namespace speedfill
