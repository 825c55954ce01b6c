#pragma once

#include <cstddef>
#include <istream>
#include <span>
#include <string>
#include <vector>

#include "speedfill/geometry.hpp"
#include "speedfill/roadnet.hpp"

namespace speedfill {

/// One crowdsensed sample after projection and unit conversion.
struct Record {
  std::string vehicle_id;
  double timestamp = 0.0;  // epoch seconds
  Point position;          // planar meters
  double speed = 0.0;      // m/s
};

/// Local equirectangular projection around a fixed origin; adequate at city scale.
class LocalProjection {
 public:
  explicit LocalProjection(GeoOrigin origin = {});
  [[nodiscard]] Point forward(double lon, double lat) const;
  [[nodiscard]] std::pair<double, double> inverse(Point p) const;  // (lon, lat)
  [[nodiscard]] const GeoOrigin& origin() const { return origin_; }

 private:
  GeoOrigin origin_;
  double meters_per_deg_lon_;
  double meters_per_deg_lat_;
};

enum class SpeedUnit { meters_per_second, kilometers_per_hour };

[[nodiscard]] SpeedUnit parse_speed_unit(const std::string& text);

struct ParseOptions {
  GeoOrigin origin;
  SpeedUnit unit = SpeedUnit::meters_per_second;
  std::size_t max_diagnostics = 20;
};

struct ParseResult {
  std::vector<Record> records;  // input order, first of each (vehicle, timestamp)
  std::size_t skipped = 0;      // malformed or invalid lines
  std::size_t duplicates = 0;   // repeated (vehicle, timestamp) pairs dropped
  std::vector<std::string> diagnostics;
};

/// CSV with header `vehicle_id,timestamp,lon,lat,speed`. An empty stream yields an
/// empty result; a non-empty stream without the header throws FormatError.
[[nodiscard]] ParseResult parse_records(std::istream& in, const ParseOptions& options = {});

/// Half-open calculation intervals: ordinal j (1-based) spans
/// [start + (j-1)T, start + jT).
class IntervalGrid {
 public:
  IntervalGrid(double start_time, double length_seconds, int count);
  [[nodiscard]] double start_time() const { return start_; }
  [[nodiscard]] double length() const { return length_; }
  [[nodiscard]] int count() const { return count_; }
  [[nodiscard]] double begin(int ordinal) const { return start_ + (ordinal - 1) * length_; }
  [[nodiscard]] double end(int ordinal) const { return start_ + ordinal * length_; }
  /// Ordinal containing t, or 0 when t lies outside the grid.
  [[nodiscard]] int ordinal(double t) const;

  /// Grid spanning [start, last timestamp].
  [[nodiscard]] static IntervalGrid covering(double start_time, double last_time, double length_seconds);

 private:
  double start_;
  double length_;
  int count_;
};

/// n_ij counts of usable records per (segment, interval) and the covered test.
class CoverageTable {
 public:
  CoverageTable(std::size_t segment_count, int interval_count, int n_thr);

  void add(SegIndex segment, int ordinal, int count = 1);
  [[nodiscard]] int count(SegIndex segment, int ordinal) const;
  [[nodiscard]] int threshold() const { return n_thr_; }
  [[nodiscard]] std::size_t segment_count() const { return segments_; }
  [[nodiscard]] int interval_count() const { return intervals_; }

  [[nodiscard]] bool is_covered(SegIndex segment, int ordinal) const {
    return count(segment, ordinal) >= n_thr_;
  }
  /// N_c for interval j.
  [[nodiscard]] std::size_t coverage_count(int ordinal) const;

 private:
  std::size_t segments_;
  int intervals_;
  int n_thr_;
  std::vector<int> counts_;
};

}  // namespace speedfill
