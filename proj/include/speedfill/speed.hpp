#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "speedfill/ingest.hpp"
#include "speedfill/mapmatch.hpp"
#include "speedfill/roadnet.hpp"

namespace speedfill {

enum class Provenance : std::uint8_t { vacant, measured, completed, fallback, initialized };

[[nodiscard]] std::string_view to_string(Provenance p);
[[nodiscard]] Provenance provenance_from_string(std::string_view text);

/// Per-segment travel-speed vectors X_r over intervals 1..N, with an explicit
/// vacancy marker and a provenance flag per entry.
class SpeedTable {
 public:
  SpeedTable() = default;
  SpeedTable(std::size_t segment_count, int interval_count);

  [[nodiscard]] std::size_t segment_count() const { return segments_; }
  [[nodiscard]] int interval_count() const { return intervals_; }

  [[nodiscard]] bool has(SegIndex s, int ordinal) const { return prov_[slot(s, ordinal)] != Provenance::vacant; }
  /// NaN when vacant.
  [[nodiscard]] double at(SegIndex s, int ordinal) const { return values_[slot(s, ordinal)]; }
  [[nodiscard]] Provenance provenance(SegIndex s, int ordinal) const { return prov_[slot(s, ordinal)]; }
  /// Throws ValidationError for negative or non-finite speeds.
  void set(SegIndex s, int ordinal, double speed, Provenance p);
  void clear(SegIndex s, int ordinal);

  /// X_s(first..last), 1-based inclusive.
  [[nodiscard]] std::span<const double> slice(SegIndex s, int first, int last) const;
  [[nodiscard]] std::size_t vacancies(int ordinal) const;

  friend bool operator==(const SpeedTable&, const SpeedTable&);

 private:
  [[nodiscard]] std::size_t slot(SegIndex s, int ordinal) const {
    return s * static_cast<std::size_t>(intervals_) + static_cast<std::size_t>(ordinal - 1);
  }
  std::size_t segments_ = 0;
  int intervals_ = 0;
  std::vector<double> values_;
  std::vector<Provenance> prov_;
};

struct TracePoint {
  double timestamp = 0.0;
  NetPosition position;
  double speed = 0.0;  // instant speed, m/s
};

/// One vehicle's matched samples in strictly increasing time order.
struct Trace {
  std::string vehicle_id;
  std::vector<TracePoint> points;
};

/// Groups matched records per vehicle (sorted by id) and orders them in time.
/// Records repeating an earlier timestamp of the same vehicle are dropped.
[[nodiscard]] std::vector<Trace> build_traces(std::span<const MatchedRecord> matched);

/// Trajectory-average speed attributed to the arrival segment of a pair.
struct PairSpeed {
  SegIndex segment = 0;
  double speed = 0.0;
};

/// For each consecutive pair (a, b) whose later timestamp lies in interval j:
/// network_distance(a, b) / (t_b - t_a). Pairs with equal timestamps, or with
/// no lawful path shorter than v_max * (t_b - t_a), are skipped.
[[nodiscard]] std::vector<PairSpeed> segment_pair_speeds(const Trace& trace, const IntervalGrid& grid, int ordinal,
                                                         const RoadNet& net, double v_max);

/// Composite travel speed of a covered segment: mean over trajectory averages
/// ending on it and instant speeds reported on it in interval j.
/// Throws NotCovered when the coverage test fails.
[[nodiscard]] double travel_speed_covered(SegIndex segment, int ordinal, std::span<const Trace> traces,
                                          const CoverageTable& coverage, const IntervalGrid& grid,
                                          const RoadNet& net, double v_max);

struct Measurements {
  CoverageTable coverage;
  SpeedTable speeds;  // covered cells only, provenance measured
};

/// Coverage counts and composite speeds for every (segment, interval) at once.
[[nodiscard]] Measurements measure_speeds(std::span<const Trace> traces, const IntervalGrid& grid,
                                          const RoadNet& net, int n_thr, double v_max);

}  // namespace speedfill
