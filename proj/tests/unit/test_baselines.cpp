#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "speedfill/baselines.hpp"
#include "speedfill/errors.hpp"

using namespace speedfill;

namespace {

SpatialSamples scatter(std::mt19937_64& rng, std::size_t n, double extent = 3000.0) {
  std::uniform_real_distribution<double> c(0.0, extent), v(2.0, 18.0);
  SpatialSamples s;
  for (std::size_t i = 0; i < n; ++i) {
    s.sites.push_back({c(rng), c(rng)});
    s.values.push_back(v(rng));
  }
  return s;
}

double brute_knn(Point t, const SpatialSamples& s, int k) {
  std::vector<std::size_t> order(s.sites.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return distance(t, s.sites[a]) < distance(t, s.sites[b]); });
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(k)));
  double num = 0, den = 0;
  for (std::size_t i : order) {
    const double w = 1.0 / distance(t, s.sites[i]);
    num += w * s.values[i];
    den += w;
  }
  return num / den;
}

// Gaussian elimination with partial pivoting on a dense copy.
std::vector<double> dense_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    std::swap(a[col], a[piv]);
    std::swap(b[col], b[piv]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
    x[i] = s / a[i][i];
  }
  return x;
}

// Information-form update: 1/P = 1/P_prior + 1/R, x = P (x_prior / P_prior + z / R).
double kalman_oracle(const std::vector<double>& z, double q, double r) {
  double x = z[0], p = r;
  for (std::size_t t = 1; t < z.size(); ++t) {
    const double prior = p + q;
    p = 1.0 / (1.0 / prior + 1.0 / r);
    x = p * (x / prior + z[t] / r);
  }
  return x;
}

}  // namespace

TEST_CASE("equidistant neighbours average plainly") {
  SpatialSamples s{{{100, 0}, {0, 100}, {-100, 0}, {0, -100}, {500, 500}}, {4, 8, 6, 10, 100}};
  CHECK(knn_estimate({0, 0}, s, 4) == doctest::Approx(7.0));
}

TEST_CASE("knn agrees with an exhaustive nearest-neighbour search") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> c(0.0, 3000.0);
  std::uniform_int_distribution<int> kk(1, 8);
  for (int trial = 0; trial < 300; ++trial) {
    const SpatialSamples s = scatter(rng, 1 + trial % 40);
    const Point t{c(rng), c(rng)};
    const int k = kk(rng);
    CHECK(knn_estimate(t, s, k) == doctest::Approx(brute_knn(t, s, k)).epsilon(1e-12));
    const auto w = knn_weights(t, s, k);
    double total = 0;
    for (const auto& [i, wi] : w) {
      CHECK(wi >= 0.0);
      total += wi;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w.size() == std::min<std::size_t>(s.sites.size(), k));
  }
}

TEST_CASE("knn at a sample returns that sample and needs at least one") {
  SpatialSamples s{{{0, 0}, {10, 0}}, {3.0, 9.0}};
  CHECK(knn_estimate({10, 0}, s, 4) == 9.0);
  CHECK_THROWS_AS((void)knn_estimate({0, 0}, SpatialSamples{}, 4), NoNeighbors);
}

TEST_CASE("the exponential model") {
  const Variogram v{0.5, 2.0, 300.0};
  CHECK(v(0.0) == 0.0);
  CHECK(v(300.0) == doctest::Approx(0.5 + 2.0 * (1.0 - std::exp(-1.0))));
  CHECK(v(1e9) == doctest::Approx(2.5));
  CHECK(v.sill() == 2.5);
}

TEST_CASE("fitted variograms are valid") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const SpatialSamples s = scatter(rng, 10 + trial * 3);
    const Variogram v = fit_variogram(empirical_variogram(s, 12));
    CHECK(v.nugget >= 0.0);
    CHECK(v.sill() >= v.nugget);
    CHECK(v.range > 0.0);
    CHECK(v.partial_sill > 0.0);
  }
}

TEST_CASE("an exactly exponential field is fitted closely") {
  // Semivariances taken straight from a known model.
  EmpiricalVariogram e;
  const Variogram truth{0.3, 4.0, 450.0};
  for (int i = 1; i <= 12; ++i) {
    e.lag.push_back(100.0 * i);
    e.semivariance.push_back(truth(100.0 * i));
    e.pairs.push_back(50);
  }
  const Variogram v = fit_variogram(e);
  for (double h : {100.0, 400.0, 900.0}) CHECK(v(h) == doctest::Approx(truth(h)).epsilon(0.02));
}

TEST_CASE("kriging reproduces samples and constants") {
  std::mt19937_64 rng(3);
  SpatialSamples s = scatter(rng, 30);
  const KrigingModel model(s);
  for (std::size_t i = 0; i < s.sites.size(); i += 5)
    CHECK(model.estimate(s.sites[i]) == doctest::Approx(s.values[i]).epsilon(1e-8));

  SpatialSamples flat = s;
  std::fill(flat.values.begin(), flat.values.end(), 7.5);
  std::vector<std::size_t> all(flat.sites.size());
  std::iota(all.begin(), all.end(), 0);
  const KrigingSolution sol = ordinary_kriging({1234, 2345}, flat, all, Variogram{0.1, 3.0, 500.0});
  CHECK(sol.value == doctest::Approx(7.5));
  double total = 0;
  for (const auto& [i, w] : sol.weights) total += w;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("kriging matches an independent dense solve") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> c(0.0, 3000.0);
  for (int trial = 0; trial < 50; ++trial) {
    const SpatialSamples s = scatter(rng, 5);
    const Variogram v{0.2, 5.0, 700.0};
    const Point t{c(rng), c(rng)};
    std::vector<std::vector<double>> a(6, std::vector<double>(6, 1.0));
    std::vector<double> b(6, 1.0);
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t j = 0; j < 5; ++j) a[i][j] = v(distance(s.sites[i], s.sites[j]));
      b[i] = v(distance(s.sites[i], t));
    }
    a[5][5] = 0.0;
    const auto x = dense_solve(a, b);
    double expected = 0;
    for (std::size_t i = 0; i < 5; ++i) expected += x[i] * s.values[i];
    const std::vector<std::size_t> idx{0, 1, 2, 3, 4};
    const KrigingSolution sol = ordinary_kriging(t, s, idx, v);
    CHECK(std::abs(sol.value - expected) <= 1e-8);
    CHECK(std::abs(sol.lagrange - x[5]) <= 1e-8);
  }
}

TEST_CASE("coincident samples make kriging singular and the model falls back") {
  SpatialSamples s{{{0, 0}, {0, 0}, {100, 0}, {0, 100}}, {1.0, 3.0, 5.0, 7.0}};
  const std::vector<std::size_t> idx{0, 1, 2, 3};
  CHECK_THROWS_AS((void)ordinary_kriging({50, 50}, s, idx, Variogram{0.0, 1.0, 100.0}), SingularSystem);
  const KrigingModel model(s);
  CHECK(std::isfinite(model.estimate({50, 50})));
  CHECK(model.estimate({50, 50}) >= 0.0);
}

TEST_CASE("arima on constants and ramps") {
  const std::vector<double> flat(8, 6.0);
  CHECK(arima_forecast(flat) == 6.0);
  std::vector<double> ramp;
  for (int i = 0; i < 8; ++i) ramp.push_back(3.0 + 0.75 * i);
  CHECK(arima_forecast(ramp) == doctest::Approx(ramp.back() + 0.75));
  const std::vector<double> one{4.0};
  CHECK_THROWS_AS((void)arima_forecast(one), InsufficientHistory);
  const std::vector<double> falling{3.0, 2.0, 1.0, 0.1};
  CHECK(arima_forecast(falling) >= 0.0);
}

TEST_CASE("arima matches the normal-equations fit") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(10.0, 3.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> x(3 + trial % 12);
    for (auto& v : x) v = g(rng);
    long double sxy = 0, sxx = 0;
    for (std::size_t t = 2; t < x.size(); ++t) {
      const long double y = x[t] - x[t - 1], z = x[t - 1] - x[t - 2];
      sxy += y * z;
      sxx += z * z;
    }
    const double phi = static_cast<double>(sxy / sxx);
    const double expected = std::max(0.0, x.back() + phi * (x.back() - x[x.size() - 2]));
    CHECK(std::abs(arima_forecast(x) - expected) <= 1e-9);
  }
}

TEST_CASE("kalman limits and recursion") {
  const std::vector<double> flat(10, 8.0);
  CHECK(kalman_forecast(flat, {0.0, 1.0}) == doctest::Approx(8.0));
  std::vector<double> z{3, 9, 4, 12};
  CHECK(kalman_forecast(z, {0.5, 1e-12}) == doctest::Approx(12.0).epsilon(1e-9));
  CHECK_THROWS_AS((void)kalman_forecast(std::vector<double>{}), InsufficientHistory);

  std::mt19937_64 rng(6);
  std::normal_distribution<double> g(10.0, 3.0);
  std::uniform_real_distribution<double> var(0.05, 3.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> obs(1 + trial % 20);
    for (auto& v : obs) v = std::abs(g(rng));
    const KalmanConfig cfg{var(rng), var(rng)};
    CHECK(std::abs(kalman_forecast(obs, cfg) - kalman_oracle(obs, cfg.process_variance, cfg.observation_variance)) <=
          1e-12 * 20.0);
  }
}

TEST_CASE("baselines are deterministic and non-negative") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> c(0.0, 3000.0);
  const SpatialSamples s = scatter(rng, 60);
  const KrigingModel a(s), b(s);
  for (int i = 0; i < 100; ++i) {
    const Point t{c(rng), c(rng)};
    const double ka = a.estimate(t);
    CHECK(ka == b.estimate(t));
    CHECK(std::isfinite(ka));
    CHECK(ka >= 0.0);
    CHECK(knn_estimate(t, s) == knn_estimate(t, s));
  }
}
