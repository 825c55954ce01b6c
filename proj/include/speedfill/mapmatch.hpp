#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "speedfill/ingest.hpp"
#include "speedfill/roadnet.hpp"

namespace speedfill {

struct MatchConfig {
  double d_min = 30.0;          // meters; farther points are outliers
  double cell_size = 250.0;     // meters
  int max_depth = 2;            // outward-neighbor levels searched while tracking
  double gap_threshold = 120.0; // seconds; longer gaps drop tracking
};

/// Uniform grid over the net's bounding box. A segment is listed in every cell
/// that its polyline, dilated by D_min, may overlap.
class GridIndex {
 public:
  GridIndex(const RoadNet& net, double cell_size, double d_min);

  [[nodiscard]] int rows() const { return rows_; }
  [[nodiscard]] int cols() const { return cols_; }
  [[nodiscard]] double cell_size() const { return cell_size_; }
  [[nodiscard]] Point origin() const { return origin_; }  // top-left corner

  /// (row, col) of p; may fall outside [0, rows) x [0, cols).
  [[nodiscard]] std::pair<int, int> cell_of(Point p) const;
  [[nodiscard]] std::span<const SegIndex> cell(int row, int col) const;
  /// Sorted, de-duplicated segments of p's cell and its 8 neighbors.
  [[nodiscard]] std::vector<SegIndex> candidates_near(Point p) const;

 private:
  Point origin_;
  double cell_size_;
  int rows_ = 0;
  int cols_ = 0;
  std::vector<std::vector<SegIndex>> cells_;
};

struct VehicleState {
  std::optional<SegIndex> last_segment;
  double last_timestamp = -std::numeric_limits<double>::infinity();
};

struct MatchResult {
  SegIndex segment = 0;
  double offset = 0.0;    // arc length of the foot point from the entrance
  double distance = 0.0;  // point-to-polyline distance
};

/// nullopt is the Outlier value.
using MatchOutcome = std::optional<MatchResult>;

/// Nearest segment among `candidates` within d_min; ties by ascending index.
[[nodiscard]] MatchOutcome nearest_segment(Point p, std::span<const SegIndex> candidates,
                                           const RoadNet& net, double d_min);

/// Grid-only search without any tracking narrowing.
[[nodiscard]] MatchOutcome match_unrestricted(Point p, const GridIndex& index, const RoadNet& net,
                                              double d_min);

/// Last segment plus outward neighbors expanded to max_depth levels, sorted.
[[nodiscard]] std::vector<SegIndex> tracking_candidates(SegIndex last, const RoadNet& net, int max_depth);

/// Matches one point and advances the vehicle state. Tracking candidates are
/// tried first when the previous match is recent; an empty or too-distant
/// candidate set falls back to the grid before declaring an outlier.
/// Throws std::invalid_argument when t precedes state.last_timestamp.
[[nodiscard]] MatchOutcome match_point(Point p, double t, VehicleState& state, const GridIndex& index,
                                       const RoadNet& net, const MatchConfig& config);

struct MatchedRecord {
  std::string vehicle_id;
  double timestamp = 0.0;
  SegIndex segment = 0;
  double offset = 0.0;
  double speed = 0.0;
};

struct MatchSummary {
  std::vector<MatchedRecord> matched;  // sorted by (vehicle, timestamp)
  std::size_t outliers = 0;
};

/// Matches a record stream; vehicles are independent and split across `jobs` workers.
[[nodiscard]] MatchSummary match_records(std::span<const Record> records, const RoadNet& net,
                                         const MatchConfig& config, unsigned jobs = 1);

}  // namespace speedfill
