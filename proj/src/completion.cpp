#include "speedfill/completion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "speedfill/errors.hpp"

namespace speedfill {

CompletionContext::CompletionContext(std::vector<double> target_known, std::vector<Contributor> contributors,
                                     std::size_t dropped)
    : target_(std::move(target_known)), dropped_(dropped) {
  if (target_.empty()) throw std::invalid_argument("completion context needs at least one known target value");
  const std::size_t w = target_.size() + 1;
  for (double t : target_) known_mean_ += t;
  known_mean_ /= static_cast<double>(target_.size());
  for (double t : target_) known_ss_ += (t - known_mean_) * (t - known_mean_);

  for (Contributor& c : contributors) {
    if (c.current.size() != w) throw std::invalid_argument("contributor slice length differs from the window");
    double mean = 0.0;
    for (double y : c.current) mean += y;
    mean /= static_cast<double>(w);
    Terms t{0.0, 0.0, c.current.back() - mean};
    for (std::size_t j = 0; j < w; ++j) {
      const double dy = c.current[j] - mean;
      t.deviation_sq += dy * dy;
      if (j + 1 < w) t.cross_known += (target_[j] - known_mean_) * dy;
    }
    if (!(t.deviation_sq > 0.0)) {
      ++dropped_;
      continue;
    }
    contributors_.push_back(std::move(c));
    terms_.push_back(t);
  }
}

std::optional<double> CompletionContext::correlation(std::size_t i, double candidate) const {
  const double w = static_cast<double>(target_.size() + 1);
  const double delta = candidate - known_mean_;
  const double syy = known_ss_ + delta * delta * (w - 1.0) / w;
  if (!(syy > 0.0)) return std::nullopt;
  const Terms& t = terms_[i];
  return (t.cross_known + delta * t.last_deviation) / std::sqrt(syy * t.deviation_sq);
}

double CompletionContext::objective(double candidate) const {
  if (contributors_.empty()) throw NotCalculable("no usable contributors");
  double f = 0.0;
  for (std::size_t i = 0; i < contributors_.size(); ++i) {
    const auto c = correlation(i, candidate);
    if (!c) throw DegenerateSeries("target window is constant at this candidate");
    const double gap = *c - contributors_[i].c_pre;
    f += gap * gap;
  }
  return f;
}

double CompletionContext::derivative(double candidate) const {
  if (contributors_.empty()) throw NotCalculable("no usable contributors");
  const double w = static_cast<double>(target_.size() + 1);
  const double delta = candidate - known_mean_;
  const double syy = known_ss_ + delta * delta * (w - 1.0) / w;
  if (!(syy > 0.0)) throw SingularPoint("target window is constant at this candidate");
  const double s = std::sqrt(syy);
  const double ds = delta * (w - 1.0) / w / s;
  double fp = 0.0;
  for (std::size_t i = 0; i < contributors_.size(); ++i) {
    const Terms& t = terms_[i];
    const double cov = t.cross_known + delta * t.last_deviation;
    const double si = std::sqrt(t.deviation_sq);
    const double c = cov / (s * si);
    const double dc = (t.last_deviation * s - cov * ds) / (syy * si);
    fp += 2.0 * (c - contributors_[i].c_pre) * dc;
  }
  return fp;
}

double minimize_on_interval(const std::function<double(double)>& f, const std::function<double(double)>& derivative,
                            double lo, double hi, double tolerance) {
  if (!(hi >= lo)) throw std::invalid_argument("minimize_on_interval: empty interval");
  if (!(tolerance > 0.0)) throw std::invalid_argument("minimize_on_interval: tolerance must be positive");
  const int steps = std::max(1, static_cast<int>(std::ceil((hi - lo) / (tolerance * 64.0))));
  const double h = (hi - lo) / steps;
  auto grid = [&](int i) { return i == steps ? hi : lo + i * h; };

  int best = -1;
  double best_f = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= steps; ++i) {
    const double v = f(grid(i));
    if (std::isfinite(v) && v < best_f) {
      best_f = v;
      best = i;
    }
  }
  if (best < 0) return lo;
  const double xb = grid(best);

  auto slope = [&](double x) -> std::optional<double> {
    try {
      const double d = derivative(x);
      if (std::isfinite(d)) return d;
    } catch (const Error&) {
    }
    return std::nullopt;
  };

  const auto db = slope(xb);
  if (!db || *db == 0.0) return xb;
  double a = 0.0;
  double b = 0.0;
  if (*db > 0.0) {
    if (best == 0) return xb;
    a = grid(best - 1);
    b = xb;
    const auto da = slope(a);
    if (!da || *da >= 0.0) return xb;
  } else {
    if (best == steps) return xb;
    a = xb;
    b = grid(best + 1);
    const auto dbr = slope(b);
    if (!dbr || *dbr <= 0.0) return xb;
  }
  const double width = tolerance * 1e-3;
  for (int it = 0; it < 200 && b - a > width; ++it) {
    const double m = 0.5 * (a + b);
    const auto dm = slope(m);
    if (!dm) break;
    if (*dm > 0.0)
      b = m;
    else
      a = m;
  }
  const double root = 0.5 * (a + b);
  const double fr = f(root);
  if (std::isfinite(fr) && (fr < best_f || (fr == best_f && root < xb))) return root;
  return xb;
}

double solve_single_vacancy(const CompletionContext& ctx, const CompletionConfig& config) {
  if (ctx.size() == 0) {
    if (ctx.dropped() > 0) throw AllDegenerate("every contributor was degenerate");
    throw NotCalculable("no contributors");
  }
  if (ctx.size() < static_cast<std::size_t>(std::max(1, config.n_min)))
    throw NotCalculable("only " + std::to_string(ctx.size()) + " usable contributors");
  auto f = [&](double x) {
    try {
      return ctx.objective(x);
    } catch (const DegenerateSeries&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  auto fp = [&](double x) { return ctx.derivative(x); };
  return minimize_on_interval(f, fp, 0.0, config.v_max, config.tolerance);
}

IntervalColumn column_of(const SpeedTable& table, int n) {
  IntervalColumn col;
  col.value.resize(table.segment_count());
  col.provenance.resize(table.segment_count());
  for (SegIndex s = 0; s < table.segment_count(); ++s) {
    col.value[s] = table.at(s, n);
    col.provenance[s] = table.provenance(s, n);
  }
  return col;
}

namespace {

bool all_present(const SpeedTable& table, SegIndex s, int first, int last) {
  if (first < 1 || last > table.interval_count()) return false;
  for (int j = first; j <= last; ++j)
    if (!table.has(s, j)) return false;
  return true;
}

bool usable_now(const IntervalColumn& column, SegIndex s) {
  const Provenance p = column.provenance[s];
  return p == Provenance::measured || p == Provenance::completed;
}

}  // namespace

CompletionContext build_context(SegIndex r, int n, const SpeedTable& table, const IntervalColumn& column,
                                const LagTable& lags, std::span<const UpstreamEntry> upstream, int w) {
  if (w < 2) throw std::invalid_argument("window length must be at least 2");
  if (n - w < 1 || n > table.interval_count() || !all_present(table, r, n - w, n - 1))
    return CompletionContext(std::vector<double>(static_cast<std::size_t>(w - 1), 0.0), {});

  const auto target_prev = table.slice(r, n - w, n - 1);
  std::vector<double> target_known(target_prev.begin() + 1, target_prev.end());

  std::vector<Contributor> contributors;
  std::size_t dropped = 0;
  for (const UpstreamEntry& e : upstream) {
    const auto lag = lags.get(e.segment, r);
    if (!lag) continue;
    const int k = lag->k;
    if (n - k - w < 1) continue;
    if (!all_present(table, e.segment, n - k - w, std::min(n - k, n - 1))) continue;
    if (k == 0 && !usable_now(column, e.segment)) continue;

    const auto prev = table.slice(e.segment, n - k - w, n - k - 1);
    const auto c = try_cross_correlation(prev, target_prev);
    if (!c) {
      ++dropped;
      continue;
    }
    Contributor con{e.segment, k, *c, {}};
    con.current.assign(prev.begin() + 1, prev.end());
    con.current.push_back(k == 0 ? column.value[e.segment] : table.at(e.segment, n - k));
    contributors.push_back(std::move(con));
  }
  return CompletionContext(std::move(target_known), std::move(contributors), dropped);
}

bool is_calculable(SegIndex r, int n, const SpeedTable& table, const IntervalColumn& column, const LagTable& lags,
                   std::span<const UpstreamEntry> upstream, const CompletionConfig& config) {
  const auto ctx = build_context(r, n, table, column, lags, upstream, config.w);
  return ctx.size() >= static_cast<std::size_t>(std::max(1, config.n_min));
}

double fallback_speed(SegIndex s, int n, const SpeedTable& table, const CompletionConfig& config) {
  double sum = 0.0;
  int count = 0;
  for (int j = std::max(1, n - config.w); j <= n - 1 && j <= table.interval_count(); ++j) {
    if (table.provenance(s, j) != Provenance::measured) continue;
    sum += table.at(s, j);
    ++count;
  }
  return count > 0 ? sum / count : config.default_speed;
}

namespace {

enum class FillState : std::uint8_t { untouched, in_progress, done };

class RegionFiller {
 public:
  RegionFiller(int n, const SpeedTable& table, const LagTable& lags,
               std::span<const std::vector<UpstreamEntry>> upstream, const CompletionConfig& config,
               IntervalColumn column, std::span<const SegIndex> members)
      : n_(n), table_(table), lags_(lags), upstream_(upstream), config_(config), column_(std::move(column)),
        in_region_(table.segment_count(), 0), status_(table.segment_count(), FillState::untouched) {
    for (SegIndex s : members) in_region_[s] = 1;
  }

  void run(std::span<const SegIndex> members) {
    for (SegIndex r : members)
      if (column_.provenance[r] == Provenance::vacant && status_[r] == FillState::untouched) fill(r);
  }

  [[nodiscard]] const IntervalColumn& column() const { return column_; }

 private:
  void fill(SegIndex r) {
    status_[r] = FillState::in_progress;
    for (const UpstreamEntry& e : upstream_[r]) {
      const SegIndex ri = e.segment;
      if (!in_region_[ri] || status_[ri] != FillState::untouched) continue;
      if (column_.provenance[ri] != Provenance::vacant) continue;
      const auto lag = lags_.get(ri, r);
      if (!lag || lag->k != 0) continue;
      fill(ri);
    }
    const auto ctx = build_context(r, n_, table_, column_, lags_, upstream_[r], config_.w);
    if (ctx.size() >= static_cast<std::size_t>(std::max(1, config_.n_min))) {
      column_.value[r] = solve_single_vacancy(ctx, config_);
      column_.provenance[r] = Provenance::completed;
    }
    status_[r] = FillState::done;
  }

  int n_;
  const SpeedTable& table_;
  const LagTable& lags_;
  std::span<const std::vector<UpstreamEntry>> upstream_;
  const CompletionConfig& config_;
  IntervalColumn column_;
  std::vector<std::uint8_t> in_region_;
  std::vector<FillState> status_;
};

}  // namespace

CompletionReport complete_all(int n, SpeedTable& table, const LagTable& lags,
                              std::span<const std::vector<UpstreamEntry>> upstream, const CompletionConfig& config,
                              std::span<const std::vector<SegIndex>> regions, unsigned jobs) {
  if (n < 1 || n > table.interval_count()) throw std::out_of_range("interval outside the table");
  if (upstream.size() != table.segment_count()) throw std::invalid_argument("upstream sets do not match the table");

  std::vector<std::vector<SegIndex>> whole;
  if (regions.empty()) {
    whole.emplace_back(table.segment_count());
    for (SegIndex s = 0; s < table.segment_count(); ++s) whole[0][s] = s;
    regions = whole;
  }
  std::vector<std::vector<SegIndex>> members(regions.begin(), regions.end());
  for (auto& m : members) std::sort(m.begin(), m.end());

  const IntervalColumn snapshot = column_of(table, n);
  std::vector<IntervalColumn> results(members.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t g = begin; g < end; ++g) {
      RegionFiller filler(n, table, lags, upstream, config, snapshot, members[g]);
      filler.run(members[g]);
      results[g] = filler.column();
    }
  };

  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(members.size())));
  if (jobs == 1) {
    work(0, members.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (members.size() + jobs - 1) / jobs;
    for (unsigned j = 0; j < jobs; ++j) {
      const std::size_t b = j * chunk;
      const std::size_t e = std::min(members.size(), b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& t : pool) t.join();
  }

  CompletionReport report;
  for (std::size_t g = 0; g < members.size(); ++g) {
    for (SegIndex s : members[g]) {
      if (snapshot.provenance[s] != Provenance::vacant) continue;
      if (results[g].provenance[s] == Provenance::completed) {
        table.set(s, n, results[g].value[s], Provenance::completed);
        ++report.completed;
      }
    }
  }
  for (SegIndex s = 0; s < table.segment_count(); ++s) {
    if (table.has(s, n)) continue;
    table.set(s, n, fallback_speed(s, n, table, config), Provenance::fallback);
    ++report.fallback;
  }
  return report;
}

void initialize_history(SpeedTable& table, const CompletionConfig& config) {
  const int last = std::min(config.w, table.interval_count());
  for (SegIndex s = 0; s < table.segment_count(); ++s) {
    double sum = 0.0;
    int count = 0;
    for (int j = 1; j <= last; ++j) {
      if (table.provenance(s, j) != Provenance::measured) continue;
      sum += table.at(s, j);
      ++count;
    }
    const double value = count > 0 ? sum / count : config.default_speed;
    for (int j = 1; j <= last; ++j)
      if (!table.has(s, j)) table.set(s, j, value, Provenance::initialized);
  }
}

std::vector<std::vector<SegIndex>> partition_regions(const RoadNet& net, int region_count) {
  if (region_count < 1) throw std::invalid_argument("region count must be at least 1");
  std::vector<SegIndex> all(net.size());
  for (SegIndex s = 0; s < net.size(); ++s) all[s] = s;

  auto wider_in_x = [&](std::span<const SegIndex> items) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (SegIndex s : items) {
      const Point p = net.central_point(s);
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y);
      y1 = std::max(y1, p.y);
    }
    return x1 - x0 >= y1 - y0;
  };

  // Cuts the wider side so each half holds a share proportional to its region count.
  std::vector<std::vector<SegIndex>> regions;
  auto split = [&](auto&& self, std::vector<SegIndex> items, int count) -> void {
    if (count <= 1 || items.size() < 2) {
      if (!items.empty()) {
        std::sort(items.begin(), items.end());
        regions.push_back(std::move(items));
      }
      return;
    }
    const bool by_x = wider_in_x(items);
    std::sort(items.begin(), items.end(), [&](SegIndex a, SegIndex b) {
      const Point pa = net.central_point(a);
      const Point pb = net.central_point(b);
      const double ka = by_x ? pa.x : pa.y;
      const double kb = by_x ? pb.x : pb.y;
      return ka != kb ? ka < kb : a < b;
    });
    const int low = count / 2;
    const std::size_t cut = items.size() * static_cast<std::size_t>(low) / static_cast<std::size_t>(count);
    std::vector<SegIndex> first(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(cut));
    std::vector<SegIndex> second(items.begin() + static_cast<std::ptrdiff_t>(cut), items.end());
    self(self, std::move(first), low);
    self(self, std::move(second), count - low);
  };
  split(split, std::move(all), region_count);
  if (regions.empty()) regions.emplace_back();
  return regions;
}

}  // namespace speedfill
