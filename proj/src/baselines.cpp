#include "speedfill/baselines.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "speedfill/errors.hpp"

namespace speedfill {

namespace {

std::vector<std::size_t> nearest(Point target, const SpatialSamples& samples, std::size_t count) {
  std::vector<std::size_t> order(samples.sites.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> d(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) d[i] = distance(target, samples.sites[i]);
  count = std::min(count, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(),
                    [&](std::size_t a, std::size_t b) { return d[a] != d[b] ? d[a] < d[b] : a < b; });
  order.resize(count);
  return order;
}

}  // namespace

EstimatorWeights knn_weights(Point target, const SpatialSamples& samples, int k) {
  if (samples.sites.empty()) throw NoNeighbors("no valued segment to interpolate from");
  const auto chosen = nearest(target, samples, static_cast<std::size_t>(std::max(1, k)));
  EstimatorWeights weights;
  for (std::size_t i : chosen)
    if (distance(target, samples.sites[i]) == 0.0) weights.emplace_back(i, 1.0);
  if (weights.empty()) {
    for (std::size_t i : chosen) weights.emplace_back(i, 1.0 / distance(target, samples.sites[i]));
  }
  double total = 0.0;
  for (const auto& [i, w] : weights) total += w;
  for (auto& [i, w] : weights) w /= total;
  return weights;
}

double knn_estimate(Point target, const SpatialSamples& samples, int k) {
  double value = 0.0;
  for (const auto& [i, w] : knn_weights(target, samples, k)) value += w * samples.values[i];
  return std::max(0.0, value);
}

double Variogram::operator()(double h) const {
  if (h <= 0.0) return 0.0;
  return nugget + partial_sill * (1.0 - std::exp(-h / range));
}

EmpiricalVariogram empirical_variogram(const SpatialSamples& samples, int bins) {
  EmpiricalVariogram out;
  const std::size_t n = samples.sites.size();
  double max_d = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) max_d = std::max(max_d, distance(samples.sites[i], samples.sites[j]));
  if (bins < 1 || !(max_d > 0.0)) return out;
  const double cutoff = max_d / 2.0;
  const double width = cutoff / bins;
  std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
  std::vector<double> g(static_cast<std::size_t>(bins), 0.0);
  std::vector<std::size_t> c(static_cast<std::size_t>(bins), 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = distance(samples.sites[i], samples.sites[j]);
      if (!(d > 0.0) || d > cutoff) continue;
      const auto b = std::min(static_cast<std::size_t>(d / width), static_cast<std::size_t>(bins - 1));
      const double diff = samples.values[i] - samples.values[j];
      h[b] += d;
      g[b] += 0.5 * diff * diff;
      ++c[b];
    }
  }
  for (std::size_t b = 0; b < h.size(); ++b) {
    if (c[b] == 0) continue;
    out.lag.push_back(h[b] / c[b]);
    out.semivariance.push_back(g[b] / c[b]);
    out.pairs.push_back(c[b]);
  }
  return out;
}

Variogram fit_variogram(const EmpiricalVariogram& e) {
  Variogram best;
  if (e.lag.empty()) return best;
  const double max_lag = *std::max_element(e.lag.begin(), e.lag.end());
  double best_sse = std::numeric_limits<double>::infinity();
  for (int step = 1; step <= 60; ++step) {
    const double range = max_lag * step / 30.0;
    // Pair-count weighted least squares of gamma ~ c0 + c1 * g(h).
    double sw = 0.0, sg = 0.0, sgg = 0.0, sy = 0.0, sgy = 0.0;
    for (std::size_t b = 0; b < e.lag.size(); ++b) {
      const double w = static_cast<double>(e.pairs[b]);
      const double gb = 1.0 - std::exp(-e.lag[b] / range);
      sw += w;
      sg += w * gb;
      sgg += w * gb * gb;
      sy += w * e.semivariance[b];
      sgy += w * gb * e.semivariance[b];
    }
    double c0 = 0.0;
    double c1 = 0.0;
    const double det = sw * sgg - sg * sg;
    if (det > 0.0) {
      c0 = (sgg * sy - sg * sgy) / det;
      c1 = (sw * sgy - sg * sy) / det;
    }
    if (!(det > 0.0) || c0 < 0.0 || c1 < 0.0) {
      c0 = 0.0;
      c1 = sgg > 0.0 ? std::max(0.0, sgy / sgg) : 0.0;
      // Pure nugget may fit better than a forced zero intercept.
      double sse_sill = 0.0, sse_nugget = 0.0;
      const double mean = sy / sw;
      for (std::size_t b = 0; b < e.lag.size(); ++b) {
        const double w = static_cast<double>(e.pairs[b]);
        const double gb = 1.0 - std::exp(-e.lag[b] / range);
        sse_sill += w * std::pow(e.semivariance[b] - c1 * gb, 2);
        sse_nugget += w * std::pow(e.semivariance[b] - mean, 2);
      }
      if (sse_nugget < sse_sill) {
        c0 = mean;
        c1 = 0.0;
      }
    }
    double sse = 0.0;
    for (std::size_t b = 0; b < e.lag.size(); ++b) {
      const double w = static_cast<double>(e.pairs[b]);
      const double gb = 1.0 - std::exp(-e.lag[b] / range);
      sse += w * std::pow(e.semivariance[b] - c0 - c1 * gb, 2);
    }
    if (sse < best_sse) {
      best_sse = sse;
      best = {c0, c1, range};
    }
  }
  if (!(best.partial_sill > 1e-12 * std::max(1.0, best.nugget))) best.partial_sill = 1.0;
  return best;
}

KrigingSolution ordinary_kriging(Point target, const SpatialSamples& samples, std::span<const std::size_t> neighbors,
                                 const Variogram& model) {
  const auto m = static_cast<Eigen::Index>(neighbors.size());
  if (m == 0) throw SingularSystem("kriging needs at least one sample");
  Eigen::MatrixXd a(m + 1, m + 1);
  Eigen::VectorXd b(m + 1);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Point pi = samples.sites[neighbors[static_cast<std::size_t>(i)]];
    for (Eigen::Index j = 0; j < m; ++j)
      a(i, j) = model(distance(pi, samples.sites[neighbors[static_cast<std::size_t>(j)]]));
    a(i, m) = 1.0;
    a(m, i) = 1.0;
    b(i) = model(distance(pi, target));
  }
  a(m, m) = 0.0;
  b(m) = 1.0;

  const Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) throw SingularSystem("kriging system is singular");
  const Eigen::VectorXd x = lu.solve(b);
  if (!x.allFinite() || (a * x - b).norm() > 1e-8 * (1.0 + b.norm()))
    throw SingularSystem("kriging system is ill-conditioned");

  KrigingSolution out;
  for (Eigen::Index i = 0; i < m; ++i) {
    const std::size_t s = neighbors[static_cast<std::size_t>(i)];
    out.weights.emplace_back(s, x(i));
    out.value += x(i) * samples.values[s];
  }
  out.lagrange = x(m);
  return out;
}

KrigingModel::KrigingModel(SpatialSamples samples, KrigingConfig config)
    : samples_(std::move(samples)), config_(config) {
  if (samples_.sites.size() >= 3) variogram_ = fit_variogram(empirical_variogram(samples_, config_.bins));
}

double KrigingModel::estimate(Point target) const {
  if (samples_.sites.size() < 3) return knn_estimate(target, samples_, config_.knn_k);
  const auto neighbors = nearest(target, samples_, static_cast<std::size_t>(std::max(1, config_.neighbors)));
  try {
    const double v = ordinary_kriging(target, samples_, neighbors, variogram_).value;
    return std::max(0.0, v);
  } catch (const SingularSystem&) {
    return knn_estimate(target, samples_, config_.knn_k);
  }
}

double arima_forecast(std::span<const double> history) {
  if (history.size() < 2) throw InsufficientHistory("ARIMA needs at least two past values");
  std::vector<double> d(history.size() - 1);
  for (std::size_t i = 1; i < history.size(); ++i) d[i - 1] = history[i] - history[i - 1];
  double num = 0.0;
  double den = 0.0;
  for (std::size_t t = 1; t < d.size(); ++t) {
    num += d[t] * d[t - 1];
    den += d[t - 1] * d[t - 1];
  }
  const double phi = den > 0.0 ? num / den : 0.0;
  return std::max(0.0, history.back() + phi * d.back());
}

double kalman_forecast(std::span<const double> observations, const KalmanConfig& config) {
  if (observations.empty()) throw InsufficientHistory("Kalman filter needs at least one observation");
  double x = observations[0];
  double p = config.observation_variance;
  for (std::size_t t = 1; t < observations.size(); ++t) {
    p += config.process_variance;
    const double s = p + config.observation_variance;
    const double gain = s > 0.0 ? p / s : 1.0;
    x += gain * (observations[t] - x);
    p *= 1.0 - gain;
  }
  return std::max(0.0, x);
}

}  // namespace speedfill
