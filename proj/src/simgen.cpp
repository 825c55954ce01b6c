#include "speedfill/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "speedfill/errors.hpp"

namespace speedfill {

namespace {

std::string vertex_name(int row, int col) { return "v" + std::to_string(row) + "_" + std::to_string(col); }

Point direction_of(const std::vector<Point>& poly, bool at_end) {
  const Point a = at_end ? poly[poly.size() - 2] : poly[0];
  const Point b = at_end ? poly[poly.size() - 1] : poly[1];
  const double len = distance(a, b);
  return {(b.x - a.x) / len, (b.y - a.y) / len};
}

}  // namespace

RoadNet generate_grid_net(const GridNetConfig& config) {
  if (config.rows < 2 || config.cols < 2) throw ValidationError("grid nets need at least 2 rows and 2 columns");
  if (!(config.edge_length > 2.0 * config.inset) || config.inset < 0.0)
    throw ValidationError("edge length must exceed twice the inset");
  std::vector<RoadSegment> segments;
  std::vector<std::string> vertices;
  for (int r = 0; r < config.rows; ++r)
    for (int c = 0; c < config.cols; ++c) vertices.push_back(vertex_name(r, c));

  struct Heading {
    char name;
    int dr;
    int dc;
  };
  constexpr Heading headings[] = {{'E', 0, 1}, {'N', 1, 0}, {'S', -1, 0}, {'W', 0, -1}};
  for (int r = 0; r < config.rows; ++r) {
    for (int c = 0; c < config.cols; ++c) {
      for (const Heading& h : headings) {
        const int r2 = r + h.dr;
        const int c2 = c + h.dc;
        if (r2 < 0 || c2 < 0 || r2 >= config.rows || c2 >= config.cols) continue;
        const Point a{c * config.edge_length, r * config.edge_length};
        const Point b{c2 * config.edge_length, r2 * config.edge_length};
        const Point d{static_cast<double>(h.dc), static_cast<double>(h.dr)};
        const Point right{d.y, -d.x};
        const double off = config.lateral_offset;
        RoadSegment seg;
        seg.id = "r" + std::to_string(r) + "c" + std::to_string(c) + h.name;
        seg.polyline = {{a.x + d.x * config.inset + right.x * off, a.y + d.y * config.inset + right.y * off},
                        {b.x - d.x * config.inset + right.x * off, b.y - d.y * config.inset + right.y * off}};
        seg.entrance = vertex_name(r, c);
        seg.exit = vertex_name(r2, c2);
        segments.push_back(std::move(seg));
      }
    }
  }
  return RoadNet(std::move(segments), std::move(vertices), config.origin);
}

RoadNet generate_grid_net(int rows, int cols, double edge_length) {
  GridNetConfig config;
  config.rows = rows;
  config.cols = cols;
  config.edge_length = edge_length;
  return generate_grid_net(config);
}

SpeedField::SpeedField(const RoadNet& net, const FieldConfig& config) : net_(&net), config_(config) {
  if (!(config.step > 0.0) || !(config.duration >= 0.0)) throw ValidationError("field step and duration must be positive");
  if (!(config.wave_speed > 0.0)) throw ValidationError("wave speed must be positive");
  if (config.coupling < 0.0 || config.coupling > 1.0) throw ValidationError("coupling must lie in [0, 1]");
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> base(config.base_min, config.base_max);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t n = net.size();
  base_.resize(n);
  for (auto& b : base_) b = config.base_min < config.base_max ? base(rng) : config.base_min;

  struct Feed {
    SegIndex from;
    double weight;
    double lag;  // seconds
  };
  std::vector<std::vector<Feed>> feeds(n);
  for (SegIndex r = 0; r < n; ++r) {
    const Point dr = direction_of(net.segment(r).polyline, false);
    double total = 0.0;
    for (SegIndex u : net.inward(r)) {
      const Point du = direction_of(net.segment(u).polyline, true);
      const double w = std::exp(config.turn_sharpness * (du.x * dr.x + du.y * dr.y));
      feeds[r].push_back({u, w, std::max(delay(u, r), config.step)});
      total += w;
    }
    for (Feed& f : feeds[r]) f.weight /= total;
  }

  const double burn_in = 1800.0;
  samples_ = static_cast<std::size_t>(std::ceil((config.duration + burn_in) / config.step)) + 1;
  wave_.assign(n * samples_, 0.0f);
  std::vector<double> noise(n);
  for (auto& e : noise) e = gauss(rng);
  const double decay = std::exp(-config.step / config.noise_time);
  const double shock = std::sqrt(1.0 - decay * decay);
  const double own = std::sqrt(1.0 - config.coupling * config.coupling);

  auto past = [&](SegIndex s, double index) -> double {
    if (index < 0.0) return 0.0;
    const auto i0 = static_cast<std::size_t>(index);
    const double frac = index - static_cast<double>(i0);
    const double a = wave_[s * samples_ + i0];
    const double b = i0 + 1 < samples_ ? wave_[s * samples_ + i0 + 1] : a;
    return a + (b - a) * frac;
  };
  for (std::size_t i = 0; i < samples_; ++i) {
    for (SegIndex r = 0; r < n; ++r) {
      noise[r] = decay * noise[r] + shock * gauss(rng);
      double inherited = 0.0;
      for (const Feed& f : feeds[r]) inherited += f.weight * past(f.from, static_cast<double>(i) - f.lag / config.step);
      wave_[r * samples_ + i] = static_cast<float>(config.coupling * inherited + own * noise[r]);
    }
  }

  // One global scale keeps the upstream mixing relation linear.
  const std::size_t skip = static_cast<std::size_t>(burn_in / config.step);
  double sum = 0.0, sq = 0.0;
  std::size_t count = 0;
  for (SegIndex r = 0; r < n; ++r)
    for (std::size_t i = skip; i < samples_; ++i) {
      const double z = wave_[r * samples_ + i];
      sum += z;
      sq += z * z;
      ++count;
    }
  if (count > 1) {
    const double mean = sum / count;
    const double sd = std::sqrt(std::max(0.0, sq / count - mean * mean));
    if (sd > 0.0)
      for (auto& z : wave_) z = static_cast<float>(z / sd);
  }
}

double SpeedField::delay(SegIndex u, SegIndex r) const {
  const auto path = net_->segment_path(u, r);
  if (!path) throw Unreachable("no path between segments");
  return path->distance / config_.wave_speed;
}

double SpeedField::wave(SegIndex s, double t) const {
  const double t0 = config_.start_time - 1800.0;
  const double index = std::clamp((t - t0) / config_.step, 0.0, static_cast<double>(samples_ - 1));
  const auto i0 = static_cast<std::size_t>(index);
  const double frac = index - static_cast<double>(i0);
  const double a = wave_[s * samples_ + i0];
  const double b = i0 + 1 < samples_ ? wave_[s * samples_ + i0 + 1] : a;
  return a + (b - a) * frac;
}

double SpeedField::speed(SegIndex s, double t) const {
  const double phase = 2.0 * std::numbers::pi * (t - config_.start_time) / config_.daily_period;
  const double daily = 1.0 + config_.daily_amplitude * std::sin(phase);
  const double v = base_[s] * daily * (1.0 + config_.amplitude * wave(s, t));
  return std::clamp(v, 1.0, config_.v_max);
}

std::vector<Record> generate_traces(const RoadNet& net, const SpeedField& field, const TraceConfig& config) {
  if (!(config.report_period > 0.0)) throw ValidationError("report period must be positive");
  if (!(config.move_step > 0.0)) throw ValidationError("move step must be positive");
  if (net.size() == 0) return {};
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<SegIndex> pick_segment(0, static_cast<SegIndex>(net.size() - 1));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const LocalProjection projection(net.origin());
  const double start = field.config().start_time;
  const double duration = field.config().duration;

  struct Vehicle {
    std::string id;
    SegIndex segment;
    double offset;
    double next_report;
  };
  std::vector<Vehicle> fleet;
  for (int v = 0; v < config.vehicles; ++v) {
    char id[16];
    std::snprintf(id, sizeof id, "v%05d", v);
    const SegIndex s = pick_segment(rng);
    const double offset = unit(rng) * net.length(s);
    const double phase = std::floor(unit(rng) * config.report_period / config.move_step) * config.move_step;
    fleet.push_back({id, s, offset, phase});
  }

  auto next_segment = [&](SegIndex s) -> std::optional<SegIndex> {
    std::vector<SegIndex> ways;
    for (SegIndex o : net.outward(s))
      if (net.exit_vertex(o) != net.entrance_vertex(s)) ways.push_back(o);
    if (ways.empty()) ways.assign(net.outward(s).begin(), net.outward(s).end());
    if (ways.empty()) return std::nullopt;
    std::uniform_int_distribution<std::size_t> pick(0, ways.size() - 1);
    return ways[pick(rng)];
  };

  std::vector<Record> records;
  const auto steps = static_cast<long long>(std::floor(duration / config.move_step + 1e-9));
  for (long long step = 0; step <= steps; ++step) {
    const double t = static_cast<double>(step) * config.move_step;
    for (Vehicle& v : fleet) {
      if (t + 1e-9 >= v.next_report) {
        const double speed = field.speed(v.segment, start + t);
        Point p = point_at_offset(net.segment(v.segment).polyline, v.offset);
        if (config.gps_noise > 0.0) {
          p.x += config.gps_noise * gauss(rng);
          p.y += config.gps_noise * gauss(rng);
        }
        double reported = speed;
        if (config.speed_noise > 0.0) reported = std::max(0.0, speed + config.speed_noise * gauss(rng));
        records.push_back({v.id, start + t, p, reported});
        v.next_report += config.report_period;
      }
      v.offset += field.speed(v.segment, start + t) * config.move_step;
      while (v.offset >= net.length(v.segment)) {
        v.offset -= net.length(v.segment);
        const auto next = next_segment(v.segment);
        if (!next) {
          v.segment = pick_segment(rng);
          v.offset = 0.0;
          break;
        }
        v.segment = *next;
      }
    }
  }
  // Round-trip through geographic coordinates, as a CSV consumer would see them.
  for (Record& r : records) {
    const auto [lon, lat] = projection.inverse(r.position);
    r.position = projection.forward(lon, lat);
  }
  return records;
}

SpeedTable truth_table(const SpeedField& field, const IntervalGrid& grid) {
  SpeedTable table(field.segment_count(), grid.count());
  for (SegIndex s = 0; s < field.segment_count(); ++s)
    for (int j = 1; j <= grid.count(); ++j)
      table.set(s, j, field.speed(s, 0.5 * (grid.begin(j) + grid.end(j))), Provenance::measured);
  return table;
}

}  // namespace speedfill
