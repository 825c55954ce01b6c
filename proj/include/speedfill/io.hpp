#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

#include <json.hpp>

#include "speedfill/correlation.hpp"
#include "speedfill/eval.hpp"
#include "speedfill/ingest.hpp"
#include "speedfill/mapmatch.hpp"
#include "speedfill/prediction.hpp"
#include "speedfill/roadnet.hpp"
#include "speedfill/speed.hpp"

namespace speedfill {

/// vehicle_id,timestamp,lon,lat,speed (m/s).
void write_records_csv(std::ostream& out, std::span<const Record> records, const LocalProjection& projection);

/// vehicle_id,timestamp,segment_id,offset_m,speed
void write_matched_csv(std::ostream& out, std::span<const MatchedRecord> matched, const RoadNet& net);
/// Throws FormatError on malformed lines or unknown segment ids.
[[nodiscard]] std::vector<MatchedRecord> read_matched_csv(std::istream& in, const RoadNet& net);

/// interval,segment_id,speed_mps,provenance for every populated cell, interval-major.
void write_speed_table_csv(std::ostream& out, const SpeedTable& table, const RoadNet& net, int first = 1,
                           int last = -1);
[[nodiscard]] nlohmann::json speed_table_to_json(const SpeedTable& table, const RoadNet& net,
                                                 const IntervalGrid& grid, int first = 1, int last = -1);
/// Inverse of write_speed_table_csv; the table spans the largest interval present.
[[nodiscard]] SpeedTable read_speed_table_csv(std::istream& in, const RoadNet& net);

/// interval,segment_id,speed_mps,provenance with provenance predicted or persistence.
void write_predictions_csv(std::ostream& out, int interval, std::span<const Prediction> predictions,
                           const RoadNet& net);

/// u,r,k,samples,source
void write_lags_csv(std::ostream& out, const LagTable& lags, const RoadNet& net);

/// interval,method,missing_ratio,cells,error
void write_eval_csv(std::ostream& out, std::span<const EvalRow> rows);

/// T,w,mean_error,intervals
void write_sweep_csv(std::ostream& out, std::span<const SweepCell> cells);

/// Opens for writing, creating parent directories; throws Error on failure.
[[nodiscard]] std::ofstream open_output(const std::filesystem::path& path);
[[nodiscard]] std::ifstream open_input(const std::filesystem::path& path);

}  // namespace speedfill
