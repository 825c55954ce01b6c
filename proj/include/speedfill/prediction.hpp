#pragma once

#include <span>
#include <vector>

#include "speedfill/correlation.hpp"
#include "speedfill/roadnet.hpp"
#include "speedfill/speed.hpp"

namespace speedfill {

struct PredictionConfig {
  int w = 13;
  double v_max = 40.0;
};

/// X_r ~ slope * X_ri + intercept over aligned pairs.
struct Regression {
  double slope = 0.0;
  double intercept = 0.0;
};

struct LaggedContributor {
  SegIndex segment = 0;
  int k = 0;
  double c_now = 0.0;
};

/// Upstream roads with lag >= 1 whose current-window correlation with r is
/// defined, in upstream order. Throws EmptyR0 when there are none.
[[nodiscard]] std::vector<LaggedContributor> positive_lag_contributors(SegIndex r, int n, const SpeedTable& table,
                                                                       const LagTable& lags,
                                                                       std::span<const UpstreamEntry> upstream,
                                                                       int w);

/// Ordinary least squares of y on x. Throws DegeneratePredictor when x is constant.
[[nodiscard]] Regression fit_least_squares(std::span<const double> x, std::span<const double> y);

/// Regression of X_r(n-w+1..n) on X_ri(n-k-w+1..n-k).
[[nodiscard]] Regression fit_regression(SegIndex ri, SegIndex r, int n, int w, int k, const SpeedTable& table);

struct Prediction {
  double value = 0.0;
  std::size_t contributors = 0;  // 0 means the persistence fallback X_r(n) was used
};

/// Correlation-weighted regression forecast of X_r(n+1), clamped to [0, v_max].
/// Weights are squared current-window correlations normalised to sum to 1.
[[nodiscard]] Prediction predict_next(SegIndex r, int n, const SpeedTable& table, const LagTable& lags,
                                      std::span<const UpstreamEntry> upstream, const PredictionConfig& config);

/// predict_next for every segment.
[[nodiscard]] std::vector<Prediction> predict_interval(int n, const SpeedTable& table, const LagTable& lags,
                                                       std::span<const std::vector<UpstreamEntry>> upstream,
                                                       const PredictionConfig& config);

}  // namespace speedfill
