#pragma once

#include <functional>
#include <span>
#include <vector>

#include "speedfill/correlation.hpp"
#include "speedfill/roadnet.hpp"
#include "speedfill/speed.hpp"

namespace speedfill {

struct CompletionConfig {
  int w = 12;
  int n_min = 4;
  double v_max = 40.0;          // m/s, upper end of the search interval
  double tolerance = 1e-3;      // m/s
  double default_speed = 16.7;  // m/s, for segments with no usable history
};

/// One upstream road feeding the single-vacancy objective.
struct Contributor {
  SegIndex segment = 0;
  int k = 0;
  double c_pre = 0.0;
  std::vector<double> current;  // X_ri(n-k-w+1 .. n-k), w values
};

/// Objective state for one vacancy: the target's w-1 known values in the
/// current window plus its contributors. Contributors whose current slice is
/// constant are dropped on construction.
class CompletionContext {
 public:
  /// `dropped` counts contributors the caller already excluded (degenerate c_pre).
  CompletionContext(std::vector<double> target_known, std::vector<Contributor> contributors,
                    std::size_t dropped = 0);

  [[nodiscard]] std::size_t size() const { return contributors_.size(); }
  [[nodiscard]] std::size_t dropped() const { return dropped_; }
  [[nodiscard]] std::span<const Contributor> contributors() const { return contributors_; }
  [[nodiscard]] std::span<const double> target_known() const { return target_; }

  /// Sum of squared c_now - c_pre gaps with `candidate` as X_r(n).
  /// Throws NotCalculable when empty, DegenerateSeries when the target window is constant.
  [[nodiscard]] double objective(double candidate) const;
  /// Analytic derivative of objective; throws SingularPoint where the target window is constant.
  [[nodiscard]] double derivative(double candidate) const;
  /// c_now of contributor i at `candidate`; nullopt on a constant target window.
  [[nodiscard]] std::optional<double> correlation(std::size_t i, double candidate) const;

 private:
  struct Terms {
    double deviation_sq;   // sum (y - mean)^2 over the contributor slice
    double cross_known;    // sum a_j (y_j - mean) over the w-1 known target positions
    double last_deviation; // y_w - mean
  };
  std::vector<double> target_;
  std::vector<Contributor> contributors_;
  std::vector<Terms> terms_;
  std::size_t dropped_ = 0;
  double known_mean_ = 0.0;
  double known_ss_ = 0.0;  // sum a_j^2, a_j = target_j - known_mean_
};

/// Minimizer of f over [lo, hi]: grid scan with step tolerance*64, then
/// bisection on f' inside the best bracket. Ties go to the lower argument.
/// Non-finite f values are never selected; f' failures keep the grid point.
[[nodiscard]] double minimize_on_interval(const std::function<double(double)>& f,
                                          const std::function<double(double)>& derivative, double lo,
                                          double hi, double tolerance);

/// argmin of ctx.objective over [0, v_max]. Throws AllDegenerate when every
/// contributor was dropped and NotCalculable when fewer than n_min remain.
[[nodiscard]] double solve_single_vacancy(const CompletionContext& ctx, const CompletionConfig& config);

/// Interval-n values visible to one completion pass: NaN where vacant.
struct IntervalColumn {
  std::vector<double> value;
  std::vector<Provenance> provenance;
};

[[nodiscard]] IntervalColumn column_of(const SpeedTable& table, int n);

/// Contributors of r at n that have every value the two correlations need and
/// that are not degenerate. k = 0 contributors need a measured or completed
/// value in `column`; history before n must be present in `table`.
[[nodiscard]] CompletionContext build_context(SegIndex r, int n, const SpeedTable& table,
                                              const IntervalColumn& column, const LagTable& lags,
                                              std::span<const UpstreamEntry> upstream, int w);

[[nodiscard]] bool is_calculable(SegIndex r, int n, const SpeedTable& table, const IntervalColumn& column,
                                 const LagTable& lags, std::span<const UpstreamEntry> upstream,
                                 const CompletionConfig& config);

/// Mean of the segment's measured values over intervals [n-w, n-1], else the default speed.
[[nodiscard]] double fallback_speed(SegIndex s, int n, const SpeedTable& table, const CompletionConfig& config);

struct CompletionReport {
  std::size_t completed = 0;
  std::size_t fallback = 0;
};

/// Fills every vacancy of interval n. Vacant segments are visited in index
/// order; a vacant zero-lag contributor is filled first, recursively, unless it
/// is already in progress. Segments left uncalculable get fallback_speed.
/// With regions, each region runs the same procedure on its own segments and
/// sees other regions only through their measured interval-n values, so the
/// result does not depend on `jobs`.
CompletionReport complete_all(int n, SpeedTable& table, const LagTable& lags,
                              std::span<const std::vector<UpstreamEntry>> upstream, const CompletionConfig& config,
                              std::span<const std::vector<SegIndex>> regions = {}, unsigned jobs = 1);

/// Fills vacancies in intervals 1..w with each segment's mean measured value
/// over those intervals, else the default speed.
void initialize_history(SpeedTable& table, const CompletionConfig& config);

/// Disjoint spatial partition by central point: the wider side is cut
/// recursively so that region sizes differ by at most one segment.
[[nodiscard]] std::vector<std::vector<SegIndex>> partition_regions(const RoadNet& net, int region_count);

}  // namespace speedfill
