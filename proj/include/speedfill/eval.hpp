#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "speedfill/baselines.hpp"
#include "speedfill/completion.hpp"
#include "speedfill/correlation.hpp"
#include "speedfill/ingest.hpp"
#include "speedfill/prediction.hpp"
#include "speedfill/roadnet.hpp"
#include "speedfill/speed.hpp"

namespace speedfill {

/// ||estimate - truth|| / ||truth||. Throws ZeroTruthNorm and std::invalid_argument on length mismatch.
[[nodiscard]] double relative_error(std::span<const double> truth, std::span<const double> estimate);

struct PipelineConfig {
  double interval_length = 80.0;  // T, seconds
  int w = 12;
  int n_thr = 2;
  double d_a = 2000.0;
  int n_min = 4;
  double v_max = 40.0;
  double default_speed = 16.7;
  double tolerance = 1e-3;
  int region_count = 1;
  unsigned jobs = 1;
  LagConfig lag;
  int knn_k = 4;
  KrigingConfig kriging;
  KalmanConfig kalman;

  [[nodiscard]] CompletionConfig completion() const;
  [[nodiscard]] PredictionConfig prediction() const;
  /// Throws ValidationError on out-of-range values.
  void validate() const;
};

/// Matched traces bucketed on one interval grid, with upstream sets, lag tables
/// and the completed speed table derived on demand.
class Pipeline {
 public:
  Pipeline(const RoadNet& net, std::vector<Trace> traces, double start_time, int interval_count,
           PipelineConfig config);
  /// Grid spanning every trace sample from `start_time` on.
  Pipeline(const RoadNet& net, std::vector<Trace> traces, double start_time, PipelineConfig config);

  [[nodiscard]] const RoadNet& net() const { return *net_; }
  [[nodiscard]] const IntervalGrid& grid() const { return grid_; }
  [[nodiscard]] const PipelineConfig& config() const { return config_; }
  [[nodiscard]] std::span<const Trace> traces() const { return traces_; }
  [[nodiscard]] const Measurements& measurements() const { return measurements_; }
  [[nodiscard]] std::span<const std::vector<UpstreamEntry>> upstream() const { return upstream_; }
  [[nodiscard]] const std::vector<std::vector<SegIndex>>& regions() const { return regions_; }

  /// Lags for the window of w intervals ending at n (n > w). Built in order,
  /// each carrying the previous window's values for untracked pairs.
  [[nodiscard]] const LagTable& lags(int n);

  /// Measured speeds, initialized history and completion of every later interval.
  [[nodiscard]] const SpeedTable& estimate();

 private:
  const RoadNet* net_;
  std::vector<Trace> traces_;
  IntervalGrid grid_;
  PipelineConfig config_;
  Measurements measurements_;
  std::vector<std::vector<UpstreamEntry>> upstream_;
  std::vector<std::vector<Visit>> visits_;
  std::vector<std::vector<SegIndex>> regions_;
  std::deque<LagTable> lags_;  // lags_[i] is the window ending at w + 1 + i
  std::unique_ptr<SpeedTable> estimate_;
};

enum class Method : std::uint8_t { stc, knn, kriging, arima, kf };

[[nodiscard]] std::string_view to_string(Method m);
[[nodiscard]] Method method_from_string(std::string_view text);

struct EvalRow {
  int interval = 0;
  Method method = Method::stc;
  double missing_ratio = 0.0;
  std::size_t cells = 0;  // cells compared
  double error = 0.0;     // 0 when no cell is compared
};

/// Hidden cells of interval n: a seeded uniform sample of round(ratio * |covered|) covered segments.
[[nodiscard]] std::vector<SegIndex> hidden_cells(const CoverageTable& coverage, int n, double missing_ratio,
                                                 std::uint64_t seed);

/// Hide-and-recover over intervals w+1..N (or `only`), one row per interval and method.
/// History comes from the pipeline's completed table; interval n is rebuilt from
/// its unhidden measurements, recovered by each method, and compared with the
/// hidden measurements.
[[nodiscard]] std::vector<EvalRow> cross_validate(Pipeline& pipeline, std::span<const Method> methods,
                                                  double missing_ratio, std::uint64_t seed,
                                                  std::span<const int> only = {});

/// One-step prediction: for each n in w+1..N-1, forecast n+1 from the completed
/// table and compare with the covered measurements of n+1. Methods: stc
/// (regression predictor), arima, kf.
[[nodiscard]] std::vector<EvalRow> evaluate_prediction(Pipeline& pipeline, std::span<const Method> methods,
                                                       std::span<const int> only = {});

/// Mean error per method over rows with at least one compared cell.
[[nodiscard]] std::map<Method, double> mean_errors(std::span<const EvalRow> rows);

enum class SweepMode : std::uint8_t { filling, prediction };

struct SweepCell {
  double interval_length = 0.0;
  int w = 0;
  double mean_error = 0.0;
  std::size_t intervals = 0;
};

struct SweepConfig {
  std::vector<double> interval_lengths;
  std::vector<int> windows;
  double missing_ratio = 0.2;
  int hours = 10;
  std::uint64_t seed = 7;
  SweepMode mode = SweepMode::filling;
  Method method = Method::stc;
};

/// Seeded choice of non-overlapping hour slots (indices of [start + 3600 i,
/// start + 3600 (i+1))), at most as many as fit in `duration`, sorted.
[[nodiscard]] std::vector<int> sample_hours(double duration, int hours, std::uint64_t seed);

/// Intervals of `grid` lying inside the chosen hour slots and past the first w.
[[nodiscard]] std::vector<int> intervals_in_hours(const IntervalGrid& grid, std::span<const int> slots, int w);

/// Mean error per (T, w) over the sampled hours. Every cell is an independent
/// pipeline on the same traces; cells run on `base.jobs` threads.
[[nodiscard]] std::vector<SweepCell> parameter_sweep(const RoadNet& net, std::span<const Trace> traces,
                                                     double start_time, double duration, const PipelineConfig& base,
                                                     const SweepConfig& sweep);

}  // namespace speedfill
