#include "avtrack/benchmark.h"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "avtrack/errors.h"
#include "json.hpp"

namespace avtrack {

using nlohmann::json;

BenchmarkSuite ParseBenchmarkSuite(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& ex) {
    throw InvalidInput(std::string("invalid JSON: ") + ex.what());
  }
  if (!j.is_object()) throw InvalidInput("suite must be a JSON object");
  static const std::set<std::string> known{"tracks", "speeds", "controllers", "sim", "threads"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw InvalidInput("unknown key suite." + it.key());
  }

  BenchmarkSuite suite;
  if (j.contains("sim")) {
    const RunSpec base = ParseRunSpec(j["sim"].dump());
    suite.sim = base.sim;
  }
  if (j.contains("threads")) {
    if (!j["threads"].is_number_integer() || j["threads"].get<int>() < 0) {
      throw InvalidInput("suite.threads must be a non-negative integer");
    }
    suite.threads = j["threads"].get<int>();
  }
  if (!j.contains("tracks") || !j["tracks"].is_array() || j["tracks"].empty()) {
    throw InvalidInput("suite.tracks must be a non-empty array");
  }
  std::set<std::string> names;
  for (const auto& t : j["tracks"]) {
    TrackSpec spec = ParseTrackSpec(t.dump());
    if (!names.insert("track:" + spec.name).second) throw InvalidInput("duplicate track name " + spec.name);
    suite.tracks.push_back(spec);
  }
  if (!j.contains("speeds") || !j["speeds"].is_array() || j["speeds"].empty()) {
    throw InvalidInput("suite.speeds must be a non-empty array");
  }
  for (const auto& s : j["speeds"]) {
    if (!s.is_number() || !(s.get<double>() >= 0.0)) throw InvalidInput("suite.speeds must be >= 0");
    suite.speeds.push_back(s.get<double>());
  }
  if (!j.contains("controllers") || !j["controllers"].is_array() || j["controllers"].empty()) {
    throw InvalidInput("suite.controllers must be a non-empty array");
  }
  for (const auto& c : j["controllers"]) {
    if (!c.is_object()) throw InvalidInput("suite.controllers entries must be objects");
    json body = c;
    ControllerEntry entry;
    if (body.contains("name")) {
      if (!body["name"].is_string()) throw InvalidInput("controller name must be a string");
      entry.name = body["name"].get<std::string>();
      body.erase("name");
    }
    // Parse through the run-spec path so steering shaper keys are honoured.
    json wrapper = json::object();
    wrapper["lateral"] = body;
    const RunSpec rs = ParseRunSpec(wrapper.dump());
    entry.spec = rs.lateral;
    entry.shaper = rs.sim.steer_shaper;
    if (entry.name.empty()) entry.name = LateralKindName(entry.spec.kind);
    if (!names.insert("ctrl:" + entry.name).second) throw InvalidInput("duplicate controller name " + entry.name);
    suite.controllers.push_back(entry);
  }
  return suite;
}

namespace {

struct Cell {
  std::size_t controller;
  std::size_t track;
  std::size_t speed;
};

std::string CellFileName(const CellResult& r) {
  std::string speed = FormatNumber(r.speed);
  for (char& ch : speed) {
    if (ch == '.') ch = 'p';
  }
  return r.controller + "__" + r.track + "__v" + speed + ".csv";
}

}  // namespace

std::vector<CellResult> RunBenchmark(const BenchmarkSuite& suite, const std::string& out_dir) {
  std::vector<Cell> cells;
  for (std::size_t c = 0; c < suite.controllers.size(); ++c) {
    for (std::size_t t = 0; t < suite.tracks.size(); ++t) {
      for (std::size_t s = 0; s < suite.speeds.size(); ++s) cells.push_back({c, t, s});
    }
  }
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

  std::vector<CellResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const Cell& cell = cells[i];
      const ControllerEntry& ctrl = suite.controllers[cell.controller];
      TrackSpec tspec = suite.tracks[cell.track];
      tspec.v_ref = suite.speeds[cell.speed];
      CellResult& res = results[i];
      res.controller = ctrl.name;
      res.track = tspec.name;
      res.speed = suite.speeds[cell.speed];
      res.csv_name = CellFileName(res);
      try {
        const Track track = BuildTrack(tspec);
        SimConfig sim = suite.sim;
        sim.steer_shaper = ctrl.shaper;
        auto lateral = MakeLateral(ctrl.spec, sim.vehicle);
        const RunRecord rec = Simulate(sim, track, *lateral);
        res.status = RunStatusName(rec.status);
        res.metrics = rec.metrics;
        res.message = rec.message;
        if (!out_dir.empty()) {
          std::ofstream out(std::filesystem::path(out_dir) / res.csv_name);
          WriteRunCsv(out, rec);
        }
      } catch (const std::exception& ex) {
        res.status = "error";
        res.message = ex.what();
      }
    }
  };
  unsigned n_threads = suite.threads > 0 ? static_cast<unsigned>(suite.threads)
                                         : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(std::max<std::size_t>(1, cells.size())));
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < n_threads; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  if (!out_dir.empty()) {
    std::ofstream out(std::filesystem::path(out_dir) / "summary.csv");
    out << SummaryCsv(results);
  }
  return results;
}

std::string SummaryCsv(const std::vector<CellResult>& cells) {
  std::ostringstream out;
  out << "controller,track,speed,status,rms_cross_track,max_cross_track,rms_heading,rms_speed_err,"
         "mean_abs_steer_rate,lap_time,completion\n";
  for (const auto& c : cells) {
    const Metrics& m = c.metrics;
    out << c.controller << ',' << c.track << ',' << FormatNumber(c.speed) << ',' << c.status << ','
        << FormatNumber(m.rms_cross_track) << ',' << FormatNumber(m.max_cross_track) << ','
        << FormatNumber(m.rms_heading) << ',' << FormatNumber(m.rms_speed_err) << ','
        << FormatNumber(m.mean_abs_steer_rate) << ','
        << (m.lap_time.has_value() ? FormatNumber(*m.lap_time) : std::string()) << ','
        << FormatNumber(m.completion) << '\n';
  }
  return out.str();
}

}  // namespace avtrack
