#pragma once

#include <span>
#include <utility>
#include <vector>

#include "speedfill/geometry.hpp"

namespace speedfill {

/// Known values at planar sites, e.g. segment central points at one interval.
struct SpatialSamples {
  std::vector<Point> sites;
  std::vector<double> values;
};

/// (sample index, weight) pairs of a linear estimator.
using EstimatorWeights = std::vector<std::pair<std::size_t, double>>;

/// Inverse-distance weights over the k nearest samples (ties by index). A
/// sample at distance 0 takes all the weight, shared with any other
/// coincident sample. Throws NoNeighbors on an empty sample set.
[[nodiscard]] EstimatorWeights knn_weights(Point target, const SpatialSamples& samples, int k = 4);
[[nodiscard]] double knn_estimate(Point target, const SpatialSamples& samples, int k = 4);

/// Exponential model: nugget + partial_sill * (1 - exp(-h / range)) for h > 0, 0 at h = 0.
struct Variogram {
  double nugget = 0.0;
  double partial_sill = 1.0;
  double range = 1.0;

  [[nodiscard]] double operator()(double h) const;
  [[nodiscard]] double sill() const { return nugget + partial_sill; }
};

struct KrigingConfig {
  int bins = 12;
  int neighbors = 16;  // nearest samples entering each linear system
  int knn_k = 4;       // fallback estimator
};

/// Distance-binned semivariances up to half the largest pair distance.
struct EmpiricalVariogram {
  std::vector<double> lag;
  std::vector<double> semivariance;
  std::vector<std::size_t> pairs;
};

[[nodiscard]] EmpiricalVariogram empirical_variogram(const SpatialSamples& samples, int bins);

/// Least-squares exponential fit: range by grid search, nugget and partial sill
/// by non-negative linear least squares at each range. A vanishing partial sill
/// is replaced by 1 so the kriging system stays regular.
[[nodiscard]] Variogram fit_variogram(const EmpiricalVariogram& empirical);

struct KrigingSolution {
  double value = 0.0;
  EstimatorWeights weights;
  double lagrange = 0.0;
};

/// Ordinary kriging over the given neighbor indices. Throws SingularSystem.
[[nodiscard]] KrigingSolution ordinary_kriging(Point target, const SpatialSamples& samples,
                                               std::span<const std::size_t> neighbors, const Variogram& model);

/// Variogram fitted once per sample set, queried at many points.
class KrigingModel {
 public:
  KrigingModel(SpatialSamples samples, KrigingConfig config = {});

  [[nodiscard]] const Variogram& variogram() const { return variogram_; }
  /// Kriged value at target, clamped to >= 0. Fewer than three samples or a
  /// singular system fall back to knn_estimate.
  [[nodiscard]] double estimate(Point target) const;

 private:
  SpatialSamples samples_;
  KrigingConfig config_;
  Variogram variogram_;
};

/// AR(1) on first differences, no intercept, one step ahead; clamped to >= 0.
/// Throws InsufficientHistory with fewer than two values.
[[nodiscard]] double arima_forecast(std::span<const double> history);

struct KalmanConfig {
  double process_variance = 0.5;      // (m/s)^2 per interval
  double observation_variance = 1.0;  // (m/s)^2
};

/// Scalar random-walk filter over the observations; returns the prior for the
/// next step. Starts at the first observation with variance equal to the
/// observation variance. Throws InsufficientHistory on an empty series.
[[nodiscard]] double kalman_forecast(std::span<const double> observations, const KalmanConfig& config = {});

}  // namespace speedfill
