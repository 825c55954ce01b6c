#pragma once

#include <cstdint>
#include <vector>

#include "speedfill/ingest.hpp"
#include "speedfill/roadnet.hpp"
#include "speedfill/speed.hpp"

namespace speedfill {

struct GridNetConfig {
  int rows = 10;
  int cols = 10;
  double edge_length = 520.0;    // meters between intersections
  double lateral_offset = 20.0;  // each carriageway sits this far right of the street axis
  double inset = 30.0;           // polylines stop short of the intersection
  GeoOrigin origin;
};

/// Manhattan grid: one vertex per intersection and a pair of one-way segments
/// per block. Segment ids read r<row>c<col><E|N|S|W> for the intersection they
/// leave and their heading.
[[nodiscard]] RoadNet generate_grid_net(const GridNetConfig& config);
[[nodiscard]] RoadNet generate_grid_net(int rows, int cols, double edge_length);

struct FieldConfig {
  double start_time = 0.0;
  double duration = 4 * 3600.0;  // seconds
  double step = 2.0;             // seconds between stored samples
  double base_min = 3.5;         // m/s, per-segment base speed drawn uniformly
  double base_max = 6.5;
  double amplitude = 0.25;        // relative size of congestion waves
  double coupling = 0.98;         // share of a segment's wave inherited from upstream
  double wave_speed = 5.0;        // m/s
  double noise_time = 60.0;       // seconds, correlation time of local fluctuations
  double daily_amplitude = 0.1;   // relative size of the daily cycle
  double daily_period = 86400.0;  // seconds
  double turn_sharpness = 4.0;    // upstream weights ~ exp(sharpness * cos(turn angle))
  double v_max = 40.0;
  std::uint64_t seed = 1;
};

/// Ground-truth speed of every segment over time. A segment's wave is a
/// weighted mix of its upstream neighbours' waves, delayed by the cp-to-cp
/// distance over the wave speed, plus its own Ornstein-Uhlenbeck noise.
class SpeedField {
 public:
  SpeedField(const RoadNet& net, const FieldConfig& config);

  /// Speed in [1, v_max] at time t (clamped to the simulated span).
  [[nodiscard]] double speed(SegIndex s, double t) const;
  [[nodiscard]] double base_speed(SegIndex s) const { return base_[s]; }
  /// Standardised wave value at time t.
  [[nodiscard]] double wave(SegIndex s, double t) const;
  /// Propagation delay from u to r (seconds) along the cp-to-cp path.
  [[nodiscard]] double delay(SegIndex u, SegIndex r) const;
  [[nodiscard]] const FieldConfig& config() const { return config_; }
  [[nodiscard]] std::size_t segment_count() const { return base_.size(); }

 private:
  const RoadNet* net_;
  FieldConfig config_;
  std::vector<double> base_;
  std::vector<float> wave_;  // segment-major, samples_ per segment
  std::size_t samples_ = 0;
};

struct TraceConfig {
  int vehicles = 500;
  double report_period = 15.0;  // seconds
  double gps_noise = 8.0;       // meters, per axis
  double speed_noise = 0.4;     // m/s
  double move_step = 1.0;       // seconds of motion per integration step
  std::uint64_t seed = 1;
};

/// Random-walk fleet driven by the field. Vehicles never U-turn unless no other
/// way out exists and respawn at dead ends. Records are sorted by (time, vehicle).
[[nodiscard]] std::vector<Record> generate_traces(const RoadNet& net, const SpeedField& field,
                                                  const TraceConfig& config);

/// Field sampled at the midpoint of every grid interval.
[[nodiscard]] SpeedTable truth_table(const SpeedField& field, const IntervalGrid& grid);

}  // namespace speedfill
