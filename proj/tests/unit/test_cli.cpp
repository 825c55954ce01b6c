#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "speedfill/cli.hpp"
#include "speedfill/errors.hpp"
#include "speedfill/io.hpp"
#include "speedfill/simgen.hpp"

using namespace speedfill;
namespace fs = std::filesystem;

namespace {

// Runs the CLI with silenced standard streams.
int run(std::initializer_list<std::string> args) {
  std::vector<std::string> storage{"speedfill"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : storage) argv.push_back(a.data());
  std::ostringstream sink;
  auto* out = std::cout.rdbuf(sink.rdbuf());
  auto* err = std::cerr.rdbuf(sink.rdbuf());
  const int code = run_command(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(out);
  std::cerr.rdbuf(err);
  return code;
}

int next_dir_id() {
  static int next = 0;
  return next++;
}

struct TempDir {
  fs::path path = fs::temp_directory_path() / ("speedfill_cli_" + std::to_string(next_dir_id()));
  TempDir() {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  [[nodiscard]] std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::vector<std::string> lines(const std::string& file) {
  std::ifstream in(file);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

nlohmann::json read_json(const std::string& file) {
  std::ifstream in(file);
  return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("generate, match, estimate and evaluate end to end") {
  const TempDir dir;
  REQUIRE(run({"simgen", "--rows", "5", "--cols", "5", "--vehicles", "80", "--hours", "0.5", "--seed", "3", "--out",
               dir / "records.csv", "--truth", dir / "truth.csv"}) == 0);
  CHECK(fs::exists(dir / "net.json"));
  CHECK(lines(dir / "records.csv").front() == "vehicle_id,timestamp,lon,lat,speed");
  CHECK(read_json(dir / "records.csv.config.json")["seed"] == 3);
  // 23 intervals of 80 s cover half an hour; 80 segments each.
  CHECK(lines(dir / "truth.csv").size() == 1 + 23 * 80);

  REQUIRE(run({"match", "--net", dir / "net.json", "--records", dir / "records.csv", "--out", dir / "matched.csv",
               "--jobs", "2"}) == 0);
  const auto matched = lines(dir / "matched.csv");
  CHECK(matched.front() == "vehicle_id,timestamp,segment_id,offset_m,speed");
  CHECK(matched.size() > lines(dir / "records.csv").size() * 9 / 10);

  REQUIRE(run({"estimate", "--net", dir / "net.json", "--matched", dir / "matched.csv", "--w", "8", "--out",
               dir / "speeds.csv"}) == 0);
  const auto echo = read_json(dir / "speeds.csv.config.json");
  CHECK(echo["command"] == "estimate");
  CHECK(echo["w"] == 8);
  CHECK(echo["T"] == 80.0);
  const RoadNet net = load_road_net(dir / "net.json");
  {
    std::ifstream in(dir / "speeds.csv");
    const SpeedTable table = read_speed_table_csv(in, net);
    for (int j = 1; j <= table.interval_count(); ++j)
      for (SegIndex s = 0; s < net.size(); ++s) CHECK(table.has(s, j));
  }

  REQUIRE(run({"estimate", "--net", dir / "net.json", "--matched", dir / "matched.csv", "--w", "8", "--format",
               "json", "--out", dir / "speeds.json"}) == 0);
  CHECK(read_json(dir / "speeds.json").contains("speeds"));

  REQUIRE(run({"evaluate", "--net", dir / "net.json", "--matched", dir / "matched.csv", "--w", "8", "--method", "stc",
               "--method", "knn", "--out", dir / "eval.csv"}) == 0);
  const auto eval = lines(dir / "eval.csv");
  CHECK(eval.front() == "interval,method,missing_ratio,cells,error");
  CHECK(eval.size() > 1);
  CHECK(read_json(dir / "eval.csv.config.json")["methods"].size() == 2);

  REQUIRE(run({"predict", "--net", dir / "net.json", "--matched", dir / "matched.csv", "--w", "8", "--T", "80",
               "--out", dir / "next.csv"}) == 0);
  CHECK(lines(dir / "next.csv").size() == 1 + net.size());

  REQUIRE(run({"lags", "--net", dir / "net.json", "--matched", dir / "matched.csv", "--w", "8", "--window-end", "12",
               "--out", dir / "lags.csv"}) == 0);
  CHECK(lines(dir / "lags.csv").front() == "u,r,k,samples,source");

  REQUIRE(run({"sweep", "--net", dir / "net.json", "--matched", dir / "matched.csv", "--T", "60,90", "--w", "6:8:2",
               "--hours", "1", "--out", dir / "sweep.csv"}) == 0);
  CHECK(lines(dir / "sweep.csv").size() == 1 + 4);
}

TEST_CASE("usage errors exit with 2 and data errors with 1") {
  const TempDir dir;
  CHECK(run({}) == 2);
  CHECK(run({"estimate", "--bogus"}) == 2);
  CHECK(run({"estimate", "--net", dir / "none.json", "--matched", dir / "none.csv", "--w", "1", "--out",
             dir / "o.csv"}) == 2);
  CHECK(run({"evaluate", "--net", dir / "none.json", "--matched", dir / "none.csv", "--missing", "2", "--out",
             dir / "o.csv"}) == 2);
  CHECK(run({"sweep", "--net", dir / "none.json", "--matched", dir / "none.csv", "--T", "1:x:2", "--out",
             dir / "o.csv"}) == 2);
  CHECK(run({"estimate", "--net", dir / "none.json", "--matched", dir / "none.csv", "--out", dir / "o.csv"}) == 1);
  CHECK(run({"--help"}) == 0);
}

TEST_CASE("matched records survive a round trip") {
  const RoadNet net = generate_grid_net(3, 3, 520.0);
  std::vector<MatchedRecord> in{{"v1", 100.25, 3, 12.5, 7.75}, {"v1", 130.0, 4, 0.0, 0.0}, {"bus 7", 1e9, 0, 459.0, 33.3}};
  std::stringstream buffer;
  write_matched_csv(buffer, in, net);
  const auto out = read_matched_csv(buffer, net);
  REQUIRE(out.size() == in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    CHECK(out[i].vehicle_id == in[i].vehicle_id);
    CHECK(out[i].timestamp == in[i].timestamp);
    CHECK(out[i].segment == in[i].segment);
    CHECK(out[i].offset == in[i].offset);
    CHECK(out[i].speed == in[i].speed);
  }
  std::stringstream unknown("vehicle_id,timestamp,segment_id,offset_m,speed\nv1,1,nowhere,0,1\n");
  CHECK_THROWS_AS((void)read_matched_csv(unknown, net), FormatError);
}

TEST_CASE("speed tables survive a round trip") {
  const RoadNet net = generate_grid_net(2, 3, 520.0);
  SpeedTable t(net.size(), 4);
  t.set(0, 1, 3.125, Provenance::measured);
  t.set(2, 2, 1.0 / 3.0, Provenance::completed);
  t.set(5, 4, 16.7, Provenance::fallback);
  t.set(1, 4, 9.0, Provenance::initialized);
  std::stringstream buffer;
  write_speed_table_csv(buffer, t, net);
  const SpeedTable back = read_speed_table_csv(buffer, net);
  REQUIRE(back.interval_count() == 4);
  for (SegIndex s = 0; s < net.size(); ++s)
    for (int j = 1; j <= 4; ++j) {
      CHECK(back.provenance(s, j) == t.provenance(s, j));
      if (t.has(s, j)) CHECK(back.at(s, j) == t.at(s, j));
    }
}
