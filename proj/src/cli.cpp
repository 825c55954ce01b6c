#include "speedfill/cli.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "speedfill/errors.hpp"
#include "speedfill/eval.hpp"
#include "speedfill/io.hpp"
#include "speedfill/mapmatch.hpp"
#include "speedfill/simgen.hpp"
#include "speedfill/text.hpp"

namespace speedfill {

namespace {

using nlohmann::json;

// Raised for option values CLI11 accepts syntactically but the pipeline rejects.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

struct PipelineOptions {
  std::string net;
  std::string matched;
  std::string out;
  std::string format = "csv";
  std::optional<double> start_time;
  PipelineConfig config;
};

void add_pipeline_options(CLI::App& cmd, PipelineOptions& o, double t, int w, bool window_options = true) {
  o.config.interval_length = t;
  o.config.w = w;
  o.config.jobs = default_jobs();
  cmd.add_option("--net", o.net, "Road net JSON")->required();
  cmd.add_option("--matched", o.matched, "Matched records CSV")->required();
  if (window_options) {
    cmd.add_option("--T,--interval-seconds", o.config.interval_length, "Interval length in seconds")
        ->capture_default_str();
    cmd.add_option("--w", o.config.w, "Correlation window length")->capture_default_str();
  }
  cmd.add_option("--nthr", o.config.n_thr, "Records needed for a covered cell")->capture_default_str();
  cmd.add_option("--da", o.config.d_a, "Upstream area threshold, meters x intersections")->capture_default_str();
  cmd.add_option("--nmin", o.config.n_min, "Contributors needed to complete a cell")->capture_default_str();
  cmd.add_option("--vmax", o.config.v_max, "Largest plausible speed, m/s")->capture_default_str();
  cmd.add_option("--default-speed", o.config.default_speed, "Speed for never-measured segments, m/s")
      ->capture_default_str();
  cmd.add_option("--tolerance", o.config.tolerance, "Solver tolerance, m/s")->capture_default_str();
  cmd.add_option("--free-flow-speed", o.config.lag.free_flow_speed, "Lag fallback speed for untracked pairs, m/s")
      ->capture_default_str();
  cmd.add_option("--regions", o.config.region_count, "Spatial regions completed in parallel")->capture_default_str();
  cmd.add_option("--jobs", o.config.jobs, "Worker threads")->capture_default_str();
  cmd.add_option("--start-time", o.start_time, "Grid start, epoch seconds (default: first matched record)");
}

json pipeline_json(const PipelineOptions& o, double start) {
  const PipelineConfig& c = o.config;
  return {{"net", o.net},
          {"matched", o.matched},
          {"start_time", start},
          {"T", c.interval_length},
          {"w", c.w},
          {"nthr", c.n_thr},
          {"da", c.d_a},
          {"nmin", c.n_min},
          {"vmax", c.v_max},
          {"default_speed", c.default_speed},
          {"tolerance", c.tolerance},
          {"free_flow_speed", c.lag.free_flow_speed},
          {"regions", c.region_count},
          {"jobs", c.jobs}};
}

void validate(const PipelineConfig& config) {
  try {
    config.validate();
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
  if (config.jobs < 1) throw UsageError("--jobs must be at least 1");
}

void write_config_echo(const std::string& out, const std::string& command, json options) {
  options["command"] = command;
  auto file = open_output(out + ".config.json");
  file << options.dump(2) << '\n';
}

struct Loaded {
  RoadNet net;
  std::vector<Trace> traces;
  double start = 0.0;
};

Loaded load_inputs(const PipelineOptions& o) {
  Loaded l{load_road_net(o.net), {}, 0.0};
  auto in = open_input(o.matched);
  const auto matched = read_matched_csv(in, l.net);
  if (o.start_time) {
    l.start = *o.start_time;
  } else {
    double first = std::numeric_limits<double>::infinity();
    for (const MatchedRecord& m : matched) first = std::min(first, m.timestamp);
    l.start = std::isfinite(first) ? std::floor(first) : 0.0;
  }
  l.traces = build_traces(matched);
  return l;
}

std::vector<double> parse_range(const std::string& text, const char* name) {
  std::vector<double> values;
  const auto bad = [&] { return UsageError(std::string(name) + " expects a:b:step or a comma list, got '" + text + "'"); };
  if (text.find(':') != std::string::npos) {
    std::vector<std::optional<double>> fields;
    std::size_t from = 0;
    for (std::size_t at = text.find(':'); from <= text.size(); at = text.find(':', from)) {
      const std::size_t end = at == std::string::npos ? text.size() : at;
      fields.push_back(parse_double(std::string_view(text).substr(from, end - from)));
      from = end + 1;
    }
    if (fields.size() != 3 || !fields[0] || !fields[1] || !fields[2]) throw bad();
    const double a = *fields[0], b = *fields[1], step = *fields[2];
    if (!(step > 0.0) || b < a) throw bad();
    const auto count = static_cast<long long>(std::floor((b - a) / step + 1e-9));
    for (long long i = 0; i <= count; ++i) values.push_back(a + static_cast<double>(i) * step);
  } else {
    for (std::string_view field : split_csv(text)) {
      const auto v = parse_double(field);
      if (!v) throw bad();
      values.push_back(*v);
    }
  }
  if (values.empty()) throw bad();
  return values;
}

std::vector<Method> parse_methods(const std::vector<std::string>& names, SweepMode mode) {
  std::vector<Method> methods;
  if (names.empty()) {
    if (mode == SweepMode::filling) return {Method::stc, Method::knn, Method::kriging, Method::arima, Method::kf};
    return {Method::stc, Method::arima, Method::kf};
  }
  for (const std::string& n : names) {
    Method m;
    try {
      m = method_from_string(n);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    if (mode == SweepMode::prediction && (m == Method::knn || m == Method::kriging))
      throw UsageError("method '" + n + "' does not forecast; use stc, arima or kf");
    methods.push_back(m);
  }
  return methods;
}

SweepMode parse_mode(const std::string& text) {
  if (text == "filling") return SweepMode::filling;
  if (text == "prediction") return SweepMode::prediction;
  throw UsageError("--mode must be filling or prediction");
}

void print_means(std::span<const EvalRow> rows) {
  for (const auto& [method, error] : mean_errors(rows))
    std::cout << to_string(method) << ' ' << format_number(error) << '\n';
}

// --- simgen -------------------------------------------------------------

struct SimgenOptions {
  GridNetConfig grid;
  FieldConfig field;
  TraceConfig traces;
  double hours = 4.0;
  double truth_interval = 80.0;
  std::string out;
  std::string truth;
  std::string net_out;
};

void add_simgen(CLI::App& app, SimgenOptions& o) {
  auto* cmd = app.add_subcommand("simgen", "Generate a grid city, a speed field and vehicle records");
  cmd->add_option("--rows", o.grid.rows)->capture_default_str();
  cmd->add_option("--cols", o.grid.cols)->capture_default_str();
  cmd->add_option("--edge", o.grid.edge_length, "Block length, meters")->capture_default_str();
  cmd->add_option("--vehicles", o.traces.vehicles)->capture_default_str();
  cmd->add_option("--hours", o.hours)->capture_default_str();
  cmd->add_option("--seed", o.field.seed)->capture_default_str();
  cmd->add_option("--report-period", o.traces.report_period, "Seconds between records")->capture_default_str();
  cmd->add_option("--gps-noise", o.traces.gps_noise, "Position noise per axis, meters")->capture_default_str();
  cmd->add_option("--speed-noise", o.traces.speed_noise, "Instant speed noise, m/s")->capture_default_str();
  cmd->add_option("--wave-speed", o.field.wave_speed, "m/s")->capture_default_str();
  cmd->add_option("--amplitude", o.field.amplitude)->capture_default_str();
  cmd->add_option("--coupling", o.field.coupling)->capture_default_str();
  cmd->add_option("--noise-time", o.field.noise_time, "Seconds")->capture_default_str();
  cmd->add_option("--base-min", o.field.base_min, "m/s")->capture_default_str();
  cmd->add_option("--base-max", o.field.base_max, "m/s")->capture_default_str();
  cmd->add_option("--T", o.truth_interval, "Interval length of the truth table")->capture_default_str();
  cmd->add_option("--out", o.out, "Records CSV")->required();
  cmd->add_option("--truth", o.truth, "Ground-truth speed CSV");
  cmd->add_option("--net-out", o.net_out, "Road net JSON (default: net.json next to --out)");
  cmd->callback([&o] {
    if (!(o.hours > 0.0)) throw UsageError("--hours must be positive");
    if (!(o.truth_interval > 0.0)) throw UsageError("--T must be positive");
    if (o.traces.vehicles < 0) throw UsageError("--vehicles must not be negative");
    o.field.duration = o.hours * 3600.0;
    o.traces.seed = o.field.seed + 1;
    if (o.net_out.empty()) o.net_out = (std::filesystem::path(o.out).parent_path() / "net.json").string();

    const RoadNet net = generate_grid_net(o.grid);
    const SpeedField field(net, o.field);
    const auto records = generate_traces(net, field, o.traces);
    save_road_net(net, o.net_out);
    {
      auto out = open_output(o.out);
      write_records_csv(out, records, LocalProjection(net.origin()));
    }
    if (!o.truth.empty()) {
      const auto grid = IntervalGrid::covering(o.field.start_time, o.field.start_time + o.field.duration,
                                               o.truth_interval);
      const SpeedTable truth = truth_table(field, grid);
      auto out = open_output(o.truth);
      out << "interval,segment_id,speed_mps\n";
      for (int j = 1; j <= grid.count(); ++j)
        for (SegIndex s = 0; s < net.size(); ++s)
          out << j << ',' << net.segment(s).id << ',' << format_number(truth.at(s, j)) << '\n';
    }
    write_config_echo(o.out, "simgen",
                      {{"rows", o.grid.rows},
                       {"cols", o.grid.cols},
                       {"edge", o.grid.edge_length},
                       {"vehicles", o.traces.vehicles},
                       {"hours", o.hours},
                       {"seed", o.field.seed},
                       {"report_period", o.traces.report_period},
                       {"gps_noise", o.traces.gps_noise},
                       {"speed_noise", o.traces.speed_noise},
                       {"wave_speed", o.field.wave_speed},
                       {"amplitude", o.field.amplitude},
                       {"coupling", o.field.coupling},
                       {"noise_time", o.field.noise_time},
                       {"base_min", o.field.base_min},
                       {"base_max", o.field.base_max},
                       {"T", o.truth_interval},
                       {"out", o.out},
                       {"truth", o.truth},
                       {"net_out", o.net_out}});
    std::cerr << "segments " << net.size() << ", records " << records.size() << '\n';
  });
}

// --- match --------------------------------------------------------------

struct MatchOptions {
  std::string net;
  std::string records;
  std::string out;
  std::string unit = "mps";
  MatchConfig config;
  unsigned jobs = default_jobs();
};

void add_match(CLI::App& app, MatchOptions& o) {
  auto* cmd = app.add_subcommand("match", "Map-match raw records onto the road net");
  cmd->add_option("--net", o.net)->required();
  cmd->add_option("--records", o.records, "vehicle_id,timestamp,lon,lat,speed CSV")->required();
  cmd->add_option("--out", o.out)->required();
  cmd->add_option("--dmin", o.config.d_min, "Outlier distance, meters")->capture_default_str();
  cmd->add_option("--cell-size", o.config.cell_size, "Grid index cell, meters")->capture_default_str();
  cmd->add_option("--max-depth", o.config.max_depth, "Outward levels searched while tracking")->capture_default_str();
  cmd->add_option("--gap", o.config.gap_threshold, "Seconds after which tracking restarts")->capture_default_str();
  cmd->add_option("--speed-unit", o.unit, "Unit of the speed column: mps or kmh")->capture_default_str();
  cmd->add_option("--jobs", o.jobs)->capture_default_str();
  cmd->callback([&o] {
    if (!(o.config.d_min > 0.0) || !(o.config.cell_size > 0.0) || o.config.max_depth < 0)
      throw UsageError("--dmin and --cell-size must be positive and --max-depth non-negative");
    if (o.jobs < 1) throw UsageError("--jobs must be at least 1");
    ParseOptions parse;
    try {
      parse.unit = parse_speed_unit(o.unit);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    const RoadNet net = load_road_net(o.net);
    parse.origin = net.origin();
    auto in = open_input(o.records);
    const ParseResult parsed = parse_records(in, parse);
    for (const std::string& d : parsed.diagnostics) std::cerr << d << '\n';
    const MatchSummary summary = match_records(parsed.records, net, o.config, o.jobs);
    {
      auto out = open_output(o.out);
      write_matched_csv(out, summary.matched, net);
    }
    write_config_echo(o.out, "match",
                      {{"net", o.net},
                       {"records", o.records},
                       {"dmin", o.config.d_min},
                       {"cell_size", o.config.cell_size},
                       {"max_depth", o.config.max_depth},
                       {"gap", o.config.gap_threshold},
                       {"speed_unit", o.unit}});
    std::cerr << "matched " << summary.matched.size() << ", outliers " << summary.outliers << ", skipped "
              << parsed.skipped << ", duplicates " << parsed.duplicates << '\n';
  });
}

// --- estimate / predict / lags -------------------------------------------

void add_estimate(CLI::App& app, PipelineOptions& o) {
  auto* cmd = app.add_subcommand("estimate", "Measure and complete the speed table");
  add_pipeline_options(*cmd, o, 80.0, 12);
  cmd->add_option("--out", o.out)->required();
  cmd->add_option("--format", o.format)->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  cmd->callback([&o] {
    validate(o.config);
    const Loaded in = load_inputs(o);
    Pipeline pipeline(in.net, in.traces, in.start, o.config);
    const SpeedTable& table = pipeline.estimate();
    {
      auto out = open_output(o.out);
      if (o.format == "json")
        out << speed_table_to_json(table, in.net, pipeline.grid()).dump(2) << '\n';
      else
        write_speed_table_csv(out, table, in.net);
    }
    write_config_echo(o.out, "estimate", pipeline_json(o, in.start));
    std::cerr << "intervals " << pipeline.grid().count() << ", segments " << in.net.size() << '\n';
  });
}

struct PredictOptions {
  PipelineOptions base;
  std::optional<int> interval;
};

void add_predict(CLI::App& app, PredictOptions& o) {
  auto* cmd = app.add_subcommand("predict", "Forecast the interval after --interval");
  add_pipeline_options(*cmd, o.base, 90.0, 13);
  cmd->add_option("--out", o.base.out)->required();
  cmd->add_option("--format", o.base.format)->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  cmd->add_option("--interval", o.interval, "Last known interval (default: the last one)");
  cmd->callback([&o] {
    validate(o.base.config);
    const Loaded in = load_inputs(o.base);
    Pipeline pipeline(in.net, in.traces, in.start, o.base.config);
    const int n = o.interval.value_or(pipeline.grid().count());
    if (n <= o.base.config.w || n > pipeline.grid().count())
      throw Error("--interval must lie in " + std::to_string(o.base.config.w + 1) + ".." +
                  std::to_string(pipeline.grid().count()));
    const auto predictions =
        predict_interval(n, pipeline.estimate(), pipeline.lags(n), pipeline.upstream(), o.base.config.prediction());
    {
      auto out = open_output(o.base.out);
      if (o.base.format == "json") {
        json doc;
        doc["interval_length"] = pipeline.grid().length();
        doc["start_time"] = pipeline.grid().start_time();
        auto& rows = doc["speeds"] = json::array();
        for (SegIndex s = 0; s < predictions.size(); ++s)
          rows.push_back({{"interval", n + 1},
                          {"segment_id", in.net.segment(s).id},
                          {"speed_mps", predictions[s].value},
                          {"provenance", predictions[s].contributors > 0 ? "predicted" : "persistence"}});
        out << doc.dump(2) << '\n';
      } else {
        write_predictions_csv(out, n + 1, predictions, in.net);
      }
    }
    auto echo = pipeline_json(o.base, in.start);
    echo["interval"] = n;
    write_config_echo(o.base.out, "predict", echo);
  });
}

struct LagsOptions {
  PipelineOptions base;
  int window_end = 0;
};

void add_lags(CLI::App& app, LagsOptions& o) {
  auto* cmd = app.add_subcommand("lags", "Dump the lag table of one window");
  add_pipeline_options(*cmd, o.base, 80.0, 12);
  cmd->add_option("--window-end", o.window_end, "Last interval of the window")->required();
  cmd->add_option("--out", o.base.out)->required();
  cmd->callback([&o] {
    validate(o.base.config);
    const Loaded in = load_inputs(o.base);
    Pipeline pipeline(in.net, in.traces, in.start, o.base.config);
    if (o.window_end <= o.base.config.w || o.window_end > pipeline.grid().count())
      throw Error("--window-end must lie in " + std::to_string(o.base.config.w + 1) + ".." +
                  std::to_string(pipeline.grid().count()));
    {
      auto out = open_output(o.base.out);
      write_lags_csv(out, pipeline.lags(o.window_end), in.net);
    }
    auto echo = pipeline_json(o.base, in.start);
    echo["window_end"] = o.window_end;
    write_config_echo(o.base.out, "lags", echo);
  });
}

// --- evaluate / sweep ----------------------------------------------------

struct EvaluateOptions {
  PipelineOptions base;
  std::vector<std::string> methods;
  std::string mode = "filling";
  double missing = 0.2;
  std::uint64_t seed = 7;
};

void add_evaluate(CLI::App& app, EvaluateOptions& o) {
  auto* cmd = app.add_subcommand("evaluate", "Hide-and-recover or one-step prediction errors per interval");
  add_pipeline_options(*cmd, o.base, 80.0, 12);
  cmd->add_option("--out", o.base.out, "Per-interval error CSV")->required();
  cmd->add_option("--method", o.methods, "stc, knn, kriging, arima or kf (repeatable; default: all)");
  cmd->add_option("--mode", o.mode, "filling or prediction")->capture_default_str();
  cmd->add_option("--missing", o.missing, "Share of covered cells hidden")->capture_default_str();
  cmd->add_option("--seed", o.seed)->capture_default_str();
  cmd->callback([&o] {
    validate(o.base.config);
    const SweepMode mode = parse_mode(o.mode);
    const auto methods = parse_methods(o.methods, mode);
    if (!(o.missing >= 0.0 && o.missing <= 1.0)) throw UsageError("--missing must lie in [0, 1]");
    const Loaded in = load_inputs(o.base);
    Pipeline pipeline(in.net, in.traces, in.start, o.base.config);
    const auto rows = mode == SweepMode::filling ? cross_validate(pipeline, methods, o.missing, o.seed)
                                                 : evaluate_prediction(pipeline, methods);
    {
      auto out = open_output(o.base.out);
      write_eval_csv(out, rows);
    }
    auto echo = pipeline_json(o.base, in.start);
    echo["mode"] = o.mode;
    echo["missing"] = o.missing;
    echo["seed"] = o.seed;
    echo["methods"] = json::array();
    for (Method m : methods) echo["methods"].push_back(std::string(to_string(m)));
    write_config_echo(o.base.out, "evaluate", echo);
    print_means(rows);
  });
}

struct SweepOptions {
  PipelineOptions base;
  std::string t_range = "10:120:10";
  std::string w_range = "5:20:1";
  std::string mode = "filling";
  std::string method = "stc";
  SweepConfig sweep;
};

void add_sweep(CLI::App& app, SweepOptions& o) {
  auto* cmd = app.add_subcommand("sweep", "Mean error over a grid of interval lengths and windows");
  add_pipeline_options(*cmd, o.base, 80.0, 12, false);
  cmd->add_option("--T", o.t_range, "Interval lengths, a:b:step or a comma list")->capture_default_str();
  cmd->add_option("--w", o.w_range, "Window lengths, a:b:step or a comma list")->capture_default_str();
  cmd->add_option("--missing", o.sweep.missing_ratio)->capture_default_str();
  cmd->add_option("--hours", o.sweep.hours, "Hour slots sampled")->capture_default_str();
  cmd->add_option("--seed", o.sweep.seed)->capture_default_str();
  cmd->add_option("--mode", o.mode, "filling or prediction")->capture_default_str();
  cmd->add_option("--method", o.method)->capture_default_str();
  cmd->add_option("--out", o.base.out)->required();
  cmd->callback([&o] {
    validate(o.base.config);
    o.sweep.mode = parse_mode(o.mode);
    o.sweep.method = parse_methods({o.method}, o.sweep.mode).front();
    o.sweep.interval_lengths = parse_range(o.t_range, "--T");
    for (double w : parse_range(o.w_range, "--w")) {
      if (w < 2.0 || w != std::floor(w)) throw UsageError("--w values must be integers of at least 2");
      o.sweep.windows.push_back(static_cast<int>(w));
    }
    for (double t : o.sweep.interval_lengths)
      if (!(t > 0.0)) throw UsageError("--T values must be positive");
    if (o.sweep.hours < 1) throw UsageError("--hours must be at least 1");
    if (!(o.sweep.missing_ratio >= 0.0 && o.sweep.missing_ratio <= 1.0))
      throw UsageError("--missing must lie in [0, 1]");
    const Loaded in = load_inputs(o.base);
    double last = in.start;
    for (const Trace& t : in.traces)
      if (!t.points.empty()) last = std::max(last, t.points.back().timestamp);
    const auto cells = parameter_sweep(in.net, in.traces, in.start, last - in.start, o.base.config, o.sweep);
    {
      auto out = open_output(o.base.out);
      write_sweep_csv(out, cells);
    }
    auto echo = pipeline_json(o.base, in.start);
    echo["T_range"] = o.t_range;
    echo["w_range"] = o.w_range;
    echo["missing"] = o.sweep.missing_ratio;
    echo["hours"] = o.sweep.hours;
    echo["seed"] = o.sweep.seed;
    echo["mode"] = o.mode;
    echo["method"] = o.method;
    write_config_echo(o.base.out, "sweep", echo);
  });
}

}  // namespace

int run_command(int argc, char** argv) {
  CLI::App app{"Travel-speed estimation and prediction from sparse vehicle records"};
  app.require_subcommand(1);
  SimgenOptions simgen;
  MatchOptions match;
  PipelineOptions estimate;
  PredictOptions predict;
  EvaluateOptions evaluate;
  SweepOptions sweep;
  LagsOptions lags;
  add_simgen(app, simgen);
  add_match(app, match);
  add_estimate(app, estimate);
  add_predict(app, predict);
  add_evaluate(app, evaluate);
  add_sweep(app, sweep);
  add_lags(app, lags);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace speedfill
