#include "speedfill/prediction.hpp"

#include <algorithm>
#include <stdexcept>

#include "speedfill/errors.hpp"

namespace speedfill {

namespace {

bool all_present(const SpeedTable& table, SegIndex s, int first, int last) {
  if (first < 1 || last > table.interval_count()) return false;
  for (int j = first; j <= last; ++j)
    if (!table.has(s, j)) return false;
  return true;
}

}  // namespace

std::vector<LaggedContributor> positive_lag_contributors(SegIndex r, int n, const SpeedTable& table,
                                                         const LagTable& lags,
                                                         std::span<const UpstreamEntry> upstream, int w) {
  std::vector<LaggedContributor> out;
  if (all_present(table, r, n - w + 1, n)) {
    const auto target = table.slice(r, n - w + 1, n);
    for (const UpstreamEntry& e : upstream) {
      const auto lag = lags.get(e.segment, r);
      if (!lag || lag->k < 1) continue;
      const LaggedWindow win = current_window(n, w, lag->k);
      if (!all_present(table, e.segment, win.contributor_first, win.contributor_last)) continue;
      const auto c = try_cross_correlation(table.slice(e.segment, win.contributor_first, win.contributor_last),
                                           target);
      if (!c) continue;
      out.push_back({e.segment, lag->k, *c});
    }
  }
  if (out.empty()) throw EmptyR0("no upstream road with a positive lag");
  return out;
}

Regression fit_least_squares(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty()) throw std::invalid_argument("regression needs equal, non-empty samples");
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw DegeneratePredictor("predictor series is constant");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

Regression fit_regression(SegIndex ri, SegIndex r, int n, int w, int k, const SpeedTable& table) {
  const LaggedWindow win = current_window(n, w, k);
  if (!all_present(table, ri, win.contributor_first, win.contributor_last) ||
      !all_present(table, r, win.target_first, win.target_last))
    throw InsufficientHistory("regression window is incomplete");
  return fit_least_squares(table.slice(ri, win.contributor_first, win.contributor_last),
                           table.slice(r, win.target_first, win.target_last));
}

Prediction predict_next(SegIndex r, int n, const SpeedTable& table, const LagTable& lags,
                        std::span<const UpstreamEntry> upstream, const PredictionConfig& config) {
  if (!table.has(r, n)) throw VacantEntry("interval " + std::to_string(n) + " is not populated");
  const Prediction persistence{table.at(r, n), 0};
  std::vector<LaggedContributor> r0;
  try {
    r0 = positive_lag_contributors(r, n, table, lags, upstream, config.w);
  } catch (const EmptyR0&) {
    return persistence;
  }

  double weight_sum = 0.0;
  double weighted = 0.0;
  std::size_t used = 0;
  for (const LaggedContributor& c : r0) {
    Regression reg;
    try {
      reg = fit_regression(c.segment, r, n, config.w, c.k, table);
    } catch (const DegeneratePredictor&) {
      continue;
    }
    const int source = n - c.k + 1;
    if (!table.has(c.segment, source)) continue;
    const double weight = c.c_now * c.c_now;
    weighted += weight * (reg.slope * table.at(c.segment, source) + reg.intercept);
    weight_sum += weight;
    ++used;
  }
  if (used == 0 || !(weight_sum > 0.0)) return persistence;
  return {std::clamp(weighted / weight_sum, 0.0, config.v_max), used};
}

std::vector<Prediction> predict_interval(int n, const SpeedTable& table, const LagTable& lags,
                                         std::span<const std::vector<UpstreamEntry>> upstream,
                                         const PredictionConfig& config) {
  std::vector<Prediction> out(table.segment_count());
  for (SegIndex r = 0; r < table.segment_count(); ++r) out[r] = predict_next(r, n, table, lags, upstream[r], config);
  return out;
}

}  // namespace speedfill
