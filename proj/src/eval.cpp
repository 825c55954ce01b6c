#include "speedfill/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <random>
#include <stdexcept>
#include <thread>

#include "speedfill/errors.hpp"

namespace speedfill {

double relative_error(std::span<const double> truth, std::span<const double> estimate) {
  if (truth.size() != estimate.size()) throw std::invalid_argument("relative_error: length mismatch");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = estimate[i] - truth[i];
    num += d * d;
    den += truth[i] * truth[i];
  }
  if (!(den > 0.0)) throw ZeroTruthNorm("truth vector has zero norm");
  return std::sqrt(num) / std::sqrt(den);
}

CompletionConfig PipelineConfig::completion() const {
  CompletionConfig c;
  c.w = w;
  c.n_min = n_min;
  c.v_max = v_max;
  c.tolerance = tolerance;
  c.default_speed = default_speed;
  return c;
}

PredictionConfig PipelineConfig::prediction() const { return {w, v_max}; }

void PipelineConfig::validate() const {
  if (!(interval_length > 0.0)) throw ValidationError("T must be positive");
  if (w < 2) throw ValidationError("w must be at least 2");
  if (n_thr < 1) throw ValidationError("N_thr must be at least 1");
  if (!(d_a > 0.0)) throw ValidationError("d_A must be positive");
  if (n_min < 1) throw ValidationError("N_min must be at least 1");
  if (!(v_max > 0.0)) throw ValidationError("v_max must be positive");
  if (!(default_speed >= 0.0) || default_speed > v_max) throw ValidationError("default speed must lie in [0, v_max]");
  if (!(tolerance > 0.0)) throw ValidationError("solver tolerance must be positive");
  if (region_count < 1) throw ValidationError("region count must be at least 1");
  if (knn_k < 1) throw ValidationError("K must be at least 1");
}

namespace {

int interval_count_for(std::span<const Trace> traces, double start, double length) {
  double last = start;
  for (const Trace& t : traces)
    if (!t.points.empty()) last = std::max(last, t.points.back().timestamp);
  return IntervalGrid::covering(start, last, length).count();
}

}  // namespace

Pipeline::Pipeline(const RoadNet& net, std::vector<Trace> traces, double start_time, int interval_count,
                   PipelineConfig config)
    : net_(&net),
      traces_(std::move(traces)),
      grid_(start_time, config.interval_length, interval_count),
      config_(config),
      measurements_(measure_speeds(traces_, grid_, net, config.n_thr, config.v_max)) {
  config_.validate();
  upstream_ = upstream_sets(net, config_.d_a);
  visits_ = build_visits(traces_);
  if (config_.region_count > 1) regions_ = partition_regions(net, config_.region_count);
}

Pipeline::Pipeline(const RoadNet& net, std::vector<Trace> traces, double start_time, PipelineConfig config)
    : Pipeline(net, traces, start_time, interval_count_for(traces, start_time, config.interval_length), config) {}

const LagTable& Pipeline::lags(int n) {
  const int first = config_.w + 1;
  if (n < first || n > grid_.count()) throw std::out_of_range("no lag window ends at interval " + std::to_string(n));
  while (static_cast<int>(lags_.size()) <= n - first) {
    const int end = first + static_cast<int>(lags_.size());
    const LagTable* previous = lags_.empty() ? nullptr : &lags_.back();
    lags_.push_back(
        build_lag_table(end, config_.w, grid_, traces_, visits_, *net_, upstream_, previous, config_.lag));
  }
  return lags_[static_cast<std::size_t>(n - first)];
}

const SpeedTable& Pipeline::estimate() {
  if (estimate_) return *estimate_;
  auto table = std::make_unique<SpeedTable>(measurements_.speeds);
  const CompletionConfig cc = config_.completion();
  initialize_history(*table, cc);
  for (int n = config_.w + 1; n <= grid_.count(); ++n)
    complete_all(n, *table, lags(n), upstream_, cc, regions_, config_.jobs);
  estimate_ = std::move(table);
  return *estimate_;
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::stc: return "stc";
    case Method::knn: return "knn";
    case Method::kriging: return "kriging";
    case Method::arima: return "arima";
    case Method::kf: return "kf";
  }
  return "stc";
}

Method method_from_string(std::string_view text) {
  for (Method m : {Method::stc, Method::knn, Method::kriging, Method::arima, Method::kf})
    if (to_string(m) == text) return m;
  throw ValidationError("unknown method '" + std::string(text) + "'");
}

std::vector<SegIndex> hidden_cells(const CoverageTable& coverage, int n, double missing_ratio, std::uint64_t seed) {
  if (!(missing_ratio >= 0.0 && missing_ratio <= 1.0)) throw ValidationError("missing ratio must lie in [0, 1]");
  std::vector<SegIndex> covered;
  for (SegIndex s = 0; s < coverage.segment_count(); ++s)
    if (coverage.is_covered(s, n)) covered.push_back(s);
  const auto count = static_cast<std::size_t>(std::llround(missing_ratio * static_cast<double>(covered.size())));
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(n)};
  std::mt19937_64 rng(seq);
  std::shuffle(covered.begin(), covered.end(), rng);
  covered.resize(count);
  std::sort(covered.begin(), covered.end());
  return covered;
}

namespace {

std::vector<int> default_range(int first, int last, std::span<const int> only) {
  std::vector<int> out;
  if (only.empty()) {
    for (int n = first; n <= last; ++n) out.push_back(n);
  } else {
    for (int n : only)
      if (n >= first && n <= last) out.push_back(n);
  }
  return out;
}

SpatialSamples samples_at(const SpeedTable& table, const RoadNet& net, int n) {
  SpatialSamples s;
  for (SegIndex r = 0; r < table.segment_count(); ++r) {
    if (table.provenance(r, n) != Provenance::measured) continue;
    s.sites.push_back(net.central_point(r));
    s.values.push_back(table.at(r, n));
  }
  return s;
}

}  // namespace

std::vector<EvalRow> cross_validate(Pipeline& pipeline, std::span<const Method> methods, double missing_ratio,
                                    std::uint64_t seed, std::span<const int> only) {
  const SpeedTable& base = pipeline.estimate();
  const PipelineConfig& cfg = pipeline.config();
  const CompletionConfig cc = cfg.completion();
  const auto& coverage = pipeline.measurements().coverage;
  const RoadNet& net = pipeline.net();
  std::vector<EvalRow> rows;

  for (int n : default_range(cfg.w + 1, pipeline.grid().count(), only)) {
    const auto hidden = hidden_cells(coverage, n, missing_ratio, seed);
    if (hidden.empty()) {
      for (Method m : methods) rows.push_back({n, m, missing_ratio, 0, 0.0});
      continue;
    }
    std::vector<double> truth;
    for (SegIndex s : hidden) truth.push_back(base.at(s, n));

    SpeedTable work = base;
    std::vector<std::uint8_t> is_hidden(base.segment_count(), 0);
    for (SegIndex s : hidden) is_hidden[s] = 1;
    for (SegIndex s = 0; s < work.segment_count(); ++s)
      if (!coverage.is_covered(s, n) || is_hidden[s]) work.clear(s, n);

    for (Method m : methods) {
      std::vector<double> est;
      switch (m) {
        case Method::stc: {
          SpeedTable filled = work;
          complete_all(n, filled, pipeline.lags(n), pipeline.upstream(), cc, pipeline.regions(), cfg.jobs);
          for (SegIndex s : hidden) est.push_back(filled.at(s, n));
          break;
        }
        case Method::knn: {
          const auto samples = samples_at(work, net, n);
          for (SegIndex s : hidden)
            est.push_back(samples.sites.empty() ? fallback_speed(s, n, work, cc)
                                                : knn_estimate(net.central_point(s), samples, cfg.knn_k));
          break;
        }
        case Method::kriging: {
          auto samples = samples_at(work, net, n);
          const bool empty = samples.sites.empty();
          const KrigingModel model(std::move(samples), cfg.kriging);
          for (SegIndex s : hidden)
            est.push_back(empty ? fallback_speed(s, n, work, cc) : model.estimate(net.central_point(s)));
          break;
        }
        case Method::arima:
          for (SegIndex s : hidden) est.push_back(arima_forecast(base.slice(s, n - cfg.w + 1, n - 1)));
          break;
        case Method::kf:
          for (SegIndex s : hidden) est.push_back(kalman_forecast(base.slice(s, 1, n - 1), cfg.kalman));
          break;
      }
      rows.push_back({n, m, missing_ratio, hidden.size(), relative_error(truth, est)});
    }
  }
  return rows;
}

std::vector<EvalRow> evaluate_prediction(Pipeline& pipeline, std::span<const Method> methods,
                                         std::span<const int> only) {
  const SpeedTable& base = pipeline.estimate();
  const PipelineConfig& cfg = pipeline.config();
  const auto& coverage = pipeline.measurements().coverage;
  std::vector<EvalRow> rows;
  for (Method m : methods)
    if (m == Method::knn || m == Method::kriging)
      throw ValidationError("method '" + std::string(to_string(m)) + "' does not forecast");

  for (int n : default_range(cfg.w + 1, pipeline.grid().count() - 1, only)) {
    std::vector<SegIndex> cells;
    for (SegIndex s = 0; s < base.segment_count(); ++s)
      if (coverage.is_covered(s, n + 1)) cells.push_back(s);
    if (cells.empty()) {
      for (Method m : methods) rows.push_back({n, m, 0.0, 0, 0.0});
      continue;
    }
    std::vector<double> truth;
    for (SegIndex s : cells) truth.push_back(base.at(s, n + 1));
    for (Method m : methods) {
      std::vector<double> est;
      for (SegIndex s : cells) {
        switch (m) {
          case Method::stc:
            est.push_back(
                predict_next(s, n, base, pipeline.lags(n), pipeline.upstream()[s], cfg.prediction()).value);
            break;
          case Method::arima:
            est.push_back(arima_forecast(base.slice(s, n - cfg.w + 2, n)));
            break;
          case Method::kf:
            est.push_back(kalman_forecast(base.slice(s, 1, n), cfg.kalman));
            break;
          default:
            break;
        }
      }
      rows.push_back({n, m, 0.0, cells.size(), relative_error(truth, est)});
    }
  }
  return rows;
}

std::map<Method, double> mean_errors(std::span<const EvalRow> rows) {
  std::map<Method, std::pair<double, std::size_t>> acc;
  for (const EvalRow& r : rows) {
    if (r.cells == 0) continue;
    acc[r.method].first += r.error;
    ++acc[r.method].second;
  }
  std::map<Method, double> out;
  for (const auto& [m, v] : acc) out[m] = v.first / static_cast<double>(v.second);
  return out;
}

std::vector<int> sample_hours(double duration, int hours, std::uint64_t seed) {
  const int slots = static_cast<int>(std::floor(duration / 3600.0 + 1e-9));
  if (slots <= 0 || hours <= 0) return {0};
  std::vector<int> all(static_cast<std::size_t>(slots));
  for (int i = 0; i < slots; ++i) all[static_cast<std::size_t>(i)] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(static_cast<std::size_t>(std::min(hours, slots)));
  std::sort(all.begin(), all.end());
  return all;
}

std::vector<int> intervals_in_hours(const IntervalGrid& grid, std::span<const int> slots, int w) {
  std::vector<int> out;
  for (int n = w + 1; n <= grid.count(); ++n) {
    for (int s : slots) {
      const double lo = grid.start_time() + 3600.0 * s;
      const double hi = lo + 3600.0;
      if (grid.begin(n) >= lo - 1e-9 && grid.end(n) <= hi + 1e-9) {
        out.push_back(n);
        break;
      }
    }
  }
  return out;
}

std::vector<SweepCell> parameter_sweep(const RoadNet& net, std::span<const Trace> traces, double start_time,
                                       double duration, const PipelineConfig& base, const SweepConfig& sweep) {
  if (sweep.interval_lengths.empty() || sweep.windows.empty()) throw ValidationError("sweep ranges must be nonempty");
  std::vector<SweepCell> cells;
  for (double t : sweep.interval_lengths)
    for (int w : sweep.windows) cells.push_back({t, w, 0.0, 0});
  const auto slots = sample_hours(duration, sweep.hours, sweep.seed);

  auto run_cell = [&](SweepCell& cell) {
    PipelineConfig cfg = base;
    cfg.interval_length = cell.interval_length;
    cfg.w = cell.w;
    cfg.jobs = 1;
    const int count = std::max(1, static_cast<int>(std::ceil(duration / cell.interval_length - 1e-9)));
    Pipeline pipeline(net, std::vector<Trace>(traces.begin(), traces.end()), start_time, count, cfg);
    const auto only = intervals_in_hours(pipeline.grid(), slots, cell.w);
    if (only.empty()) return;
    const Method methods[] = {sweep.method};
    const auto rows = sweep.mode == SweepMode::filling
                          ? cross_validate(pipeline, methods, sweep.missing_ratio, sweep.seed, only)
                          : evaluate_prediction(pipeline, methods, only);
    const auto means = mean_errors(rows);
    const auto it = means.find(sweep.method);
    cell.mean_error = it == means.end() ? 0.0 : it->second;
    for (const EvalRow& r : rows)
      if (r.cells > 0) ++cell.intervals;
  };

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> failures(cells.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        run_cell(cells[i]);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(base.jobs, static_cast<unsigned>(cells.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
  return cells;
}

}  // namespace speedfill
