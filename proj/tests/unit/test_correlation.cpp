#include <doctest.h>

#include <cmath>
#include <random>

#include "../support/nets.hpp"
#include "speedfill/correlation.hpp"
#include "speedfill/errors.hpp"
#include "speedfill/simgen.hpp"

using namespace speedfill;

namespace {

// Textbook sample Pearson: covariance over n-1 divided by the two sample deviations.
double pearson_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  const long double n = static_cast<long double>(x.size());
  long double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const long double mx = sx / n, my = sy / n;
  long double cov = 0, vx = 0, vy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    cov += (x[i] - mx) * (y[i] - my);
    vx += (x[i] - mx) * (x[i] - mx);
    vy += (y[i] - my) * (y[i] - my);
  }
  cov /= n - 1;
  const long double dx = std::sqrt(vx / (n - 1)), dy = std::sqrt(vy / (n - 1));
  return static_cast<double>(cov / (dx * dy));
}

SpeedTable table_from(const std::vector<std::vector<double>>& rows) {
  SpeedTable t(rows.size(), static_cast<int>(rows[0].size()));
  for (std::size_t s = 0; s < rows.size(); ++s)
    for (std::size_t j = 0; j < rows[s].size(); ++j)
      t.set(static_cast<SegIndex>(s), static_cast<int>(j) + 1, rows[s][j], Provenance::measured);
  return t;
}

std::vector<double> random_series(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(10.0, 3.0);
  std::vector<double> v(n);
  for (auto& x : v) x = std::max(0.1, g(rng));
  return v;
}

// Vehicles drive a chain at one constant speed, reporting every `period` seconds.
std::vector<Trace> constant_fleet(const RoadNet& net, double v, double period, int vehicles, double duration) {
  double total = 0.0;
  for (SegIndex s = 0; s < net.size(); ++s) total += net.length(s);
  std::vector<Trace> out;
  for (int k = 0; k < vehicles; ++k) {
    Trace t{"v" + std::to_string(100 + k), {}};
    const double depart = 13.0 * k;
    for (double time = depart; time < depart + duration; time += period) {
      const double along = v * (time - depart);
      if (along >= total) break;
      double rest = along;
      SegIndex s = 0;
      while (rest >= net.length(s)) rest -= net.length(s++);
      t.points.push_back({time, {s, rest}, v});
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

TEST_CASE("self correlation is one and mirrored correlation is minus one") {
  const std::vector<double> x{3, 1, 4, 1, 5, 9, 2, 6};
  std::vector<double> y;
  for (double v : x) y.push_back(-v + 20.0);
  CHECK(cross_correlation(x, x) == doctest::Approx(1.0));
  CHECK(cross_correlation(x, y) == doctest::Approx(-1.0));
}

TEST_CASE("random pairs match the textbook formula") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> len(2, 30);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = len(rng);
    const auto x = random_series(rng, n);
    const auto y = random_series(rng, n);
    const auto expected = pearson_oracle(x, y);
    if (!std::isfinite(expected)) continue;
    CHECK(std::abs(cross_correlation(x, y) - expected) <= 1e-9);
  }
}

TEST_CASE("constant or mismatched input is rejected") {
  const std::vector<double> flat(5, 4.0), x{1, 2, 3, 4, 5}, shorter{1, 2, 3};
  CHECK_THROWS_AS((void)cross_correlation(flat, x), DegenerateSeries);
  CHECK_THROWS_AS((void)cross_correlation(x, flat), DegenerateSeries);
  CHECK_THROWS_AS((void)cross_correlation(x, shorter), std::invalid_argument);
  CHECK_FALSE(try_cross_correlation(flat, x).has_value());
}

TEST_CASE("positive affine maps keep the correlation, negative ones flip it") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> a(0.1, 5.0), b(-10.0, 10.0);
  for (int i = 0; i < 200; ++i) {
    const auto x = random_series(rng, 12);
    const auto y = random_series(rng, 12);
    const double c = cross_correlation(x, y);
    const double scale = a(rng), shift = b(rng);
    std::vector<double> up, down;
    for (double v : x) {
      up.push_back(scale * v + shift);
      down.push_back(-scale * v + shift);
    }
    CHECK(cross_correlation(up, y) == doctest::Approx(c).epsilon(1e-9));
    CHECK(cross_correlation(down, y) == doctest::Approx(-c).epsilon(1e-9));
  }
}

TEST_CASE("window index arithmetic") {
  const LaggedWindow p = previous_window(20, 10, 3);
  CHECK(p.contributor_first == 7);
  CHECK(p.contributor_last == 16);
  CHECK(p.target_first == 10);
  CHECK(p.target_last == 19);
  const LaggedWindow c = current_window(20, 10, 3);
  CHECK(c.contributor_first == 8);
  CHECK(c.contributor_last == 17);
  CHECK(c.target_first == 11);
  CHECK(c.target_last == 20);
  for (int n = 5; n < 40; ++n)
    for (int w = 2; w < 15; ++w)
      for (int k = 0; k < 6; ++k) {
        const LaggedWindow a = previous_window(n, w, k), b = current_window(n, w, k);
        CHECK(a.contributor_last - a.contributor_first + 1 == w);
        CHECK(a.target_last - a.target_first + 1 == w);
        CHECK(a.target_first - a.contributor_first == k);
        CHECK(b.contributor_first == a.contributor_first + 1);
        CHECK(b.target_last == n);
      }
}

TEST_CASE("a copy shifted by k correlates perfectly") {
  std::mt19937_64 rng(4);
  const auto base = random_series(rng, 40);
  const int k = 3;
  std::vector<double> target(40);
  for (int j = 0; j < 40; ++j) target[j] = j >= k ? base[j - k] : 10.0;
  const SpeedTable t = table_from({base, target});
  CHECK(c_pre(0, 1, 30, 10, k, t) == doctest::Approx(1.0));
  CHECK(c_now(0, 1, 30, 10, k, t, target[29]) == doctest::Approx(1.0));
}

TEST_CASE("the slices reach exactly the documented intervals") {
  // Marker series: the contributor's value at j is j, the target's is j^2.
  std::vector<double> xs(30), ys(30);
  for (int j = 1; j <= 30; ++j) {
    xs[j - 1] = j;
    ys[j - 1] = 0.1 * j * j;
  }
  const SpeedTable t = table_from({xs, ys});
  std::vector<double> x, y;
  for (int j = 7; j <= 16; ++j) x.push_back(j);
  for (int j = 10; j <= 19; ++j) y.push_back(0.1 * j * j);
  CHECK(c_pre(0, 1, 20, 10, 3, t) == doctest::Approx(pearson_oracle(x, y)).epsilon(1e-12));
  x.clear();
  y.clear();
  for (int j = 8; j <= 17; ++j) x.push_back(j);
  for (int j = 11; j <= 19; ++j) y.push_back(0.1 * j * j);
  y.push_back(55.5);
  CHECK(c_now(0, 1, 20, 10, 3, t, 55.5) == doctest::Approx(pearson_oracle(x, y)).epsilon(1e-12));
}

TEST_CASE("missing history, vacancies and flat contributors are errors") {
  std::vector<double> xs(20, 5.0), ys(20);
  for (int j = 0; j < 20; ++j) ys[j] = j;
  SpeedTable t = table_from({xs, ys});
  CHECK_THROWS_AS((void)c_pre(0, 1, 12, 10, 3, t), InsufficientHistory);
  CHECK_THROWS_AS((void)c_pre(0, 1, 18, 10, 3, t), DegenerateSeries);
  t.set(0, 6, 7.0, Provenance::measured);
  t.clear(1, 15);
  try {
    (void)c_pre(0, 1, 18, 10, 3, t);
    FAIL("expected VacantEntry");
  } catch (const VacantEntry& e) {
    CHECK(std::string(e.what()).find("15") != std::string::npos);
  }
  // The target's current entry may be vacant: it is the unknown.
  SpeedTable u = table_from({ys, ys});
  u.clear(1, 18);
  CHECK_NOTHROW((void)c_now(0, 1, 18, 10, 0, u, 3.0));
}

TEST_CASE("the next window's previous correlation equals this window's current one") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const SpeedTable t = table_from({random_series(rng, 40), random_series(rng, 40)});
    for (int k = 0; k < 4; ++k)
      CHECK(c_pre(0, 1, 31, 12, k, t) == doctest::Approx(c_now(0, 1, 30, 12, k, t, t.at(1, 30))).epsilon(1e-12));
  }
}

TEST_CASE("the current correlation moves smoothly with the candidate") {
  std::mt19937_64 rng(6);
  const SpeedTable t = table_from({random_series(rng, 30), random_series(rng, 30)});
  double prev = c_now(0, 1, 25, 10, 2, t, 0.0);
  for (double v = 0.05; v <= 30.0; v += 0.05) {
    const double c = c_now(0, 1, 25, 10, 2, t, v);
    CHECK(std::abs(c - prev) < 0.05);
    prev = c;
  }
}

TEST_CASE("one vehicle at 10 m/s over 400 m gives lag zero at T = 60") {
  const RoadNet net = testsupport::chain({400.0, 400.0});
  const IntervalGrid grid(0.0, 60.0, 5);
  const std::vector<Trace> traces{{"a", {{100.0, {0, 200.0}, 10.0}, {140.0, {1, 200.0}, 10.0}}}};
  const LagEstimate e = estimate_lag(0, 1, 3, 2, grid, traces, net);
  CHECK(e.k == 0);
  CHECK(e.samples == 1);
  CHECK(e.mean_travel_time == doctest::Approx(40.0));
}

TEST_CASE("selections nearest the central points break ties in the right direction") {
  // Two records on u equally far from its centre: the later one is used.
  // Two records on r equally far from its centre: the earlier one is used.
  const RoadNet net = testsupport::chain({400.0, 400.0});
  const IntervalGrid grid(0.0, 100.0, 5);
  const std::vector<Trace> traces{{"a",
                                   {{100.0, {0, 150.0}, 0.0},
                                    {110.0, {0, 250.0}, 0.0},
                                    {130.0, {1, 150.0}, 0.0},
                                    {140.0, {1, 250.0}, 0.0}}}};
  const LagEstimate e = estimate_lag(0, 1, 3, 2, grid, traces, net);
  // Selected 250 m on u at 110 s and 150 m on r at 130 s: 300 m in 20 s.
  CHECK(e.mean_travel_time == doctest::Approx(400.0 / 15.0));
}

TEST_CASE("no traversal and unreachable pairs raise") {
  const RoadNet net = testsupport::chain({400.0, 400.0});
  const IntervalGrid grid(0.0, 60.0, 5);
  const std::vector<Trace> traces{{"a", {{100.0, {1, 200.0}, 10.0}}}};
  CHECK_THROWS_AS((void)estimate_lag(0, 1, 3, 2, grid, traces, net), NoTraversals);
  CHECK_THROWS_AS((void)estimate_lag(1, 0, 3, 2, grid, traces, net), Unreachable);
}

TEST_CASE("a constant-speed fleet gives floor(d / (v T))") {
  for (double len : {180.0, 300.0, 520.0})
    for (double v : {3.0, 5.5, 9.0})
      for (double T : {30.0, 60.0, 90.0}) {
        const RoadNet net = testsupport::chain({len, len, len, len});
        const auto traces = constant_fleet(net, v, 5.0, 6, 4 * len / v + 10.0);
        const IntervalGrid grid(0.0, T, static_cast<int>(std::ceil((4 * len / v + 200.0) / T)));
        const int n = grid.count();
        for (SegIndex u = 0; u < 3; ++u)
          for (SegIndex r = u + 1; r < 4; ++r) {
            const double d = len * (r - u);
            const LagEstimate e = estimate_lag(u, r, n, n, grid, traces, net);
            CHECK(e.k == static_cast<int>(std::floor(d / (v * T) + 1e-9)));
            CHECK(e.mean_travel_time == doctest::Approx(d / v));
          }
      }
}

TEST_CASE("shifting every timestamp leaves the lag unchanged") {
  const RoadNet net = generate_grid_net(4, 4, 520.0);
  FieldConfig fc;
  fc.duration = 3600.0;
  const SpeedField field(net, fc);
  TraceConfig tc;
  tc.vehicles = 150;
  tc.gps_noise = 0.0;
  tc.speed_noise = 0.0;
  std::vector<MatchedRecord> matched = match_records(generate_traces(net, field, tc), net, {}).matched;
  const auto traces = build_traces(matched);
  for (auto& m : matched) m.timestamp += 86400.0 * 3;
  const auto shifted = build_traces(matched);
  const IntervalGrid grid(0.0, 80.0, 45), moved(86400.0 * 3, 80.0, 45);
  int compared = 0;
  for (SegIndex r = 0; r < net.size(); ++r)
    for (const UpstreamEntry& e : net.upstream_set(r, 2000.0)) {
      try {
        const LagEstimate a = estimate_lag(e.segment, r, 40, 12, grid, traces, net);
        const LagEstimate b = estimate_lag(e.segment, r, 40, 12, moved, shifted, net);
        CHECK(a.k == b.k);
        CHECK(a.samples == b.samples);
        CHECK(a.mean_travel_time == doctest::Approx(b.mean_travel_time));
        ++compared;
      } catch (const NoTraversals&) {
        CHECK_THROWS_AS((void)estimate_lag(e.segment, r, 40, 12, moved, shifted, net), NoTraversals);
      }
    }
  CHECK(compared > 20);
}

TEST_CASE("the lag table agrees with per-pair estimates and falls back when cold") {
  const RoadNet net = generate_grid_net(4, 4, 520.0);
  FieldConfig fc;
  fc.duration = 3600.0;
  const SpeedField field(net, fc);
  TraceConfig tc;
  tc.vehicles = 80;
  const auto matched = match_records(generate_traces(net, field, tc), net, {}).matched;
  const auto traces = build_traces(matched);
  const auto visits = build_visits(traces);
  const IntervalGrid grid(0.0, 80.0, 45);
  std::vector<std::vector<UpstreamEntry>> upstream;
  for (SegIndex r = 0; r < net.size(); ++r) upstream.push_back(net.upstream_set(r, 2000.0));
  const LagConfig config;

  const LagTable first = build_lag_table(20, 12, grid, traces, visits, net, upstream, nullptr, config);
  int tracked = 0, cold = 0;
  for (SegIndex r = 0; r < net.size(); ++r)
    for (const UpstreamEntry& e : upstream[r]) {
      const auto entry = first.get(e.segment, r);
      REQUIRE(entry);
      CHECK(entry->k >= 0);
      if (entry->source == LagSource::tracked) {
        const LagEstimate est = estimate_lag(e.segment, r, 20, 12, grid, traces, net, config);
        CHECK(entry->k == est.k);
        CHECK(entry->samples == est.samples);
        ++tracked;
      } else {
        CHECK(entry->source == LagSource::free_flow);
        CHECK(entry->k == static_cast<int>(std::floor(e.distance / (config.free_flow_speed * 80.0) + 1e-9)));
        CHECK_THROWS_AS((void)estimate_lag(e.segment, r, 20, 12, grid, traces, net, config), NoTraversals);
        ++cold;
      }
    }
  CHECK(tracked > 0);
  CHECK(cold > 0);

  // A window with no traffic at all inherits every value from the previous table.
  const std::vector<Trace> none;
  const std::vector<std::vector<Visit>> no_visits;
  const LagTable later = build_lag_table(21, 12, grid, none, no_visits, net, upstream, &first, config);
  for (const auto& row : first.rows()) {
    const auto entry = later.get(row.u, row.r);
    REQUIRE(entry);
    CHECK(entry->k == row.entry.k);
    CHECK(entry->source == LagSource::carried);
  }
}

TEST_CASE("lag table rows are ordered by target then contributor") {
  LagTable t(5, 3);
  t.set(4, 1, {2, 3, LagSource::tracked});
  t.set(2, 1, {1, 1, LagSource::tracked});
  t.set(0, 3, {0, 0, LagSource::free_flow});
  const auto rows = t.rows();
  REQUIRE(rows.size() == 3);
  CHECK((rows[0].r == 1 && rows[0].u == 2));
  CHECK((rows[1].r == 1 && rows[1].u == 4));
  CHECK(rows[2].r == 3);
  CHECK_FALSE(t.get(1, 4).has_value());
}

TEST_CASE("the stationarity profile is finite where windows fit") {
  const RoadNet net = generate_grid_net(3, 3, 520.0);
  FieldConfig fc;
  fc.duration = 4 * 3600.0;
  const SpeedField field(net, fc);
  const SpeedTable truth = truth_table(field, IntervalGrid(0.0, 60.0, 240));
  const std::vector<int> ws{2, 5, 10, 20, 40, 400};
  for (SegIndex s = 0; s < net.size(); ++s) {
    const auto profile = stationarity_profile(truth, s, ws);
    for (std::size_t i = 0; i + 1 < ws.size(); ++i) CHECK(std::isfinite(profile[i]));
    CHECK(std::isnan(profile.back()));
  }
}
