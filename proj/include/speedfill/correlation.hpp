#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "speedfill/ingest.hpp"
#include "speedfill/roadnet.hpp"
#include "speedfill/speed.hpp"

namespace speedfill {

/// Sample Pearson correlation of two aligned, equal-length slices. Lag alignment
/// is the caller's job. Throws DegenerateSeries when either slice is constant and
/// std::invalid_argument on mismatched or too-short input.
[[nodiscard]] double cross_correlation(std::span<const double> x, std::span<const double> y);

/// Same as cross_correlation but nullopt instead of throwing.
[[nodiscard]] std::optional<double> try_cross_correlation(std::span<const double> x,
                                                          std::span<const double> y) noexcept;

/// Inclusive 1-based ordinal ranges used by the previous-window and current-window correlations.
struct LaggedWindow {
  int contributor_first = 0;
  int contributor_last = 0;
  int target_first = 0;
  int target_last = 0;
};

/// Contributor X_ri(n-k-w .. n-k-1) against target X_r(n-w .. n-1).
[[nodiscard]] LaggedWindow previous_window(int n, int w, int k);
/// Contributor X_ri(n-k-w+1 .. n-k) against target X_r(n-w+1 .. n).
[[nodiscard]] LaggedWindow current_window(int n, int w, int k);

/// Correlation between contributor ri and target r over the window ending at n-1.
/// Throws InsufficientHistory, VacantEntry or DegenerateSeries.
[[nodiscard]] double c_pre(SegIndex ri, SegIndex r, int n, int w, int k, const SpeedTable& table);

/// Correlation over the window ending at n, with `candidate` standing in for X_r(n).
[[nodiscard]] double c_now(SegIndex ri, SegIndex r, int n, int w, int k, const SpeedTable& table,
                           double candidate);

enum class LagSource : std::uint8_t { tracked, carried, free_flow };

struct LagEntry {
  int k = 0;
  int samples = 0;  // |V_{u,r}| behind a tracked value
  LagSource source = LagSource::tracked;
};

/// Time lagging factors k_{u,r} for one window.
class LagTable {
 public:
  LagTable() = default;
  LagTable(int window_end, int w) : window_end_(window_end), w_(w) {}

  [[nodiscard]] int window_end() const { return window_end_; }
  [[nodiscard]] int window_length() const { return w_; }
  void set(SegIndex u, SegIndex r, LagEntry entry) { entries_[key(u, r)] = entry; }
  [[nodiscard]] std::optional<LagEntry> get(SegIndex u, SegIndex r) const;
  [[nodiscard]] std::size_t size() const { return entries_.size(); }

  struct Row {
    SegIndex u;
    SegIndex r;
    LagEntry entry;
  };
  /// Rows ordered by (r, u).
  [[nodiscard]] std::vector<Row> rows() const;

 private:
  static std::uint64_t key(SegIndex u, SegIndex r) { return (std::uint64_t{r} << 32) | u; }
  int window_end_ = 0;
  int w_ = 0;
  std::unordered_map<std::uint64_t, LagEntry> entries_;
};

struct LagConfig {
  double free_flow_speed = 16.7;  // m/s, cold-pair fallback
  double max_elapsed = 1800.0;    // seconds between the u and r selections
  int extra_hops = 1;             // visits tolerated beyond the shortest path's intermediates
  double v_max = 40.0;
};

/// Maximal runs of consecutive samples on one segment, per trace.
struct Visit {
  SegIndex segment = 0;
  std::uint32_t first = 0;  // index into Trace::points
  std::uint32_t last = 0;   // inclusive
};

[[nodiscard]] std::vector<std::vector<Visit>> build_visits(std::span<const Trace> traces);

struct LagEstimate {
  int k = 0;
  int samples = 0;
  double mean_travel_time = 0.0;  // seconds, cp(u) -> cp(r)
};

/// Vehicle-tracking lag between u and r for the window of w intervals ending at
/// `window_end`. Throws NoTraversals when no vehicle seen on r in the window
/// previously came from u, and Unreachable when r cannot be reached from u.
[[nodiscard]] LagEstimate estimate_lag(SegIndex u, SegIndex r, int window_end, int w, const IntervalGrid& grid,
                                       std::span<const Trace> traces, const RoadNet& net,
                                       const LagConfig& config = {});

/// Lags for every (u in upstream[r], r) pair. Pairs without traversals reuse
/// `previous` when it has them, otherwise floor(dist / (v_ff * T)).
[[nodiscard]] LagTable build_lag_table(int window_end, int w, const IntervalGrid& grid,
                                       std::span<const Trace> traces,
                                       std::span<const std::vector<Visit>> visits, const RoadNet& net,
                                       std::span<const std::vector<UpstreamEntry>> upstream,
                                       const LagTable* previous, const LagConfig& config = {});

/// Mean within-window standard deviation of a segment's speeds for each window
/// length in `window_lengths`; NaN where no full window fits.
[[nodiscard]] std::vector<double> stationarity_profile(const SpeedTable& table, SegIndex segment,
                                                       std::span<const int> window_lengths);

}  // namespace speedfill
