#include "speedfill/io.hpp"

#include <fstream>
#include <string>

#include "speedfill/errors.hpp"
#include "speedfill/text.hpp"

namespace speedfill {

namespace {

std::string_view trim_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

}  // namespace

void write_records_csv(std::ostream& out, std::span<const Record> records, const LocalProjection& projection) {
  out << "vehicle_id,timestamp,lon,lat,speed\n";
  for (const Record& r : records) {
    const auto [lon, lat] = projection.inverse(r.position);
    out << r.vehicle_id << ',' << format_number(r.timestamp) << ',' << format_number(lon) << ','
        << format_number(lat) << ',' << format_number(r.speed) << '\n';
  }
}

void write_matched_csv(std::ostream& out, std::span<const MatchedRecord> matched, const RoadNet& net) {
  out << "vehicle_id,timestamp,segment_id,offset_m,speed\n";
  for (const MatchedRecord& m : matched)
    out << m.vehicle_id << ',' << format_number(m.timestamp) << ',' << net.segment(m.segment).id << ','
        << format_number(m.offset) << ',' << format_number(m.speed) << '\n';
}

std::vector<MatchedRecord> read_matched_csv(std::istream& in, const RoadNet& net) {
  std::vector<MatchedRecord> out;
  std::string line;
  if (!std::getline(in, line)) return out;
  if (trim_cr(line) != "vehicle_id,timestamp,segment_id,offset_m,speed")
    throw FormatError("matched CSV must start with 'vehicle_id,timestamp,segment_id,offset_m,speed'");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim_cr(line);
    if (text.empty()) continue;
    const auto f = split_csv(text);
    const auto where = " on line " + std::to_string(line_no);
    if (f.size() != 5) throw FormatError("expected 5 fields" + where);
    const auto seg = net.find(f[2]);
    if (!seg) throw FormatError("unknown segment '" + std::string(f[2]) + "'" + where);
    const auto t = parse_double(f[1]);
    const auto off = parse_double(f[3]);
    const auto v = parse_double(f[4]);
    if (!t || !off || !v) throw FormatError("non-numeric field" + where);
    out.push_back({std::string(f[0]), *t, *seg, *off, *v});
  }
  return out;
}

void write_speed_table_csv(std::ostream& out, const SpeedTable& table, const RoadNet& net, int first, int last) {
  if (last < 0) last = table.interval_count();
  out << "interval,segment_id,speed_mps,provenance\n";
  for (int j = std::max(1, first); j <= last; ++j)
    for (SegIndex s = 0; s < table.segment_count(); ++s)
      if (table.has(s, j))
        out << j << ',' << net.segment(s).id << ',' << format_number(table.at(s, j)) << ','
            << to_string(table.provenance(s, j)) << '\n';
}

nlohmann::json speed_table_to_json(const SpeedTable& table, const RoadNet& net, const IntervalGrid& grid, int first,
                                   int last) {
  if (last < 0) last = table.interval_count();
  nlohmann::json doc;
  doc["interval_length"] = grid.length();
  doc["start_time"] = grid.start_time();
  auto& rows = doc["speeds"] = nlohmann::json::array();
  for (int j = std::max(1, first); j <= last; ++j)
    for (SegIndex s = 0; s < table.segment_count(); ++s)
      if (table.has(s, j))
        rows.push_back({{"interval", j},
                        {"segment_id", net.segment(s).id},
                        {"speed_mps", table.at(s, j)},
                        {"provenance", std::string(to_string(table.provenance(s, j)))}});
  return doc;
}

SpeedTable read_speed_table_csv(std::istream& in, const RoadNet& net) {
  struct Row {
    int interval;
    SegIndex segment;
    double speed;
    Provenance provenance;
  };
  std::vector<Row> rows;
  std::string line;
  if (!std::getline(in, line) || trim_cr(line) != "interval,segment_id,speed_mps,provenance")
    throw FormatError("speed CSV must start with 'interval,segment_id,speed_mps,provenance'");
  int intervals = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim_cr(line);
    if (text.empty()) continue;
    const auto f = split_csv(text);
    const auto where = " on line " + std::to_string(line_no);
    if (f.size() != 4) throw FormatError("expected 4 fields" + where);
    const auto j = parse_int(f[0]);
    const auto seg = net.find(f[1]);
    const auto v = parse_double(f[2]);
    if (!j || *j < 1 || !seg || !v) throw FormatError("malformed row" + where);
    rows.push_back({static_cast<int>(*j), *seg, *v, provenance_from_string(f[3])});
    intervals = std::max(intervals, static_cast<int>(*j));
  }
  SpeedTable table(net.size(), intervals);
  for (const Row& r : rows) table.set(r.segment, r.interval, r.speed, r.provenance);
  return table;
}

void write_predictions_csv(std::ostream& out, int interval, std::span<const Prediction> predictions,
                           const RoadNet& net) {
  out << "interval,segment_id,speed_mps,provenance\n";
  for (SegIndex s = 0; s < predictions.size(); ++s)
    out << interval << ',' << net.segment(s).id << ',' << format_number(predictions[s].value) << ','
        << (predictions[s].contributors > 0 ? "predicted" : "persistence") << '\n';
}

void write_lags_csv(std::ostream& out, const LagTable& lags, const RoadNet& net) {
  out << "u,r,k,samples,source\n";
  for (const auto& row : lags.rows()) {
    const char* source = row.entry.source == LagSource::tracked   ? "tracked"
                         : row.entry.source == LagSource::carried ? "carried"
                                                                  : "free_flow";
    out << net.segment(row.u).id << ',' << net.segment(row.r).id << ',' << row.entry.k << ',' << row.entry.samples
        << ',' << source << '\n';
  }
}

void write_eval_csv(std::ostream& out, std::span<const EvalRow> rows) {
  out << "interval,method,missing_ratio,cells,error\n";
  for (const EvalRow& r : rows)
    out << r.interval << ',' << to_string(r.method) << ',' << format_number(r.missing_ratio) << ',' << r.cells << ','
        << format_number(r.error) << '\n';
}

void write_sweep_csv(std::ostream& out, std::span<const SweepCell> cells) {
  out << "T,w,mean_error,intervals\n";
  for (const SweepCell& c : cells)
    out << format_number(c.interval_length) << ',' << c.w << ',' << format_number(c.mean_error) << ','
        << c.intervals << '\n';
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  return out;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path.string() + "'");
  return in;
}

}  // namespace speedfill
