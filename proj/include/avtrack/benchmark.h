#pragma once

#include <string>
#include <vector>

#include "avtrack/config.h"
#include "avtrack/sim.h"

namespace avtrack {

struct ControllerEntry {
  std::string name;
  LateralSpec spec;
  OutputShaper shaper;
};

struct BenchmarkSuite {
  std::vector<TrackSpec> tracks;
  std::vector<double> speeds;
  std::vector<ControllerEntry> controllers;
  SimConfig sim;     // base configuration shared by every cell
  int threads = 0;   // 0 = hardware concurrency
};

/// Throws InvalidInput on malformed suites.
BenchmarkSuite ParseBenchmarkSuite(const std::string& json_text);

struct CellResult {
  std::string controller;
  std::string track;
  double speed = 0.0;
  std::string status;  // run status, or "error"
  Metrics metrics;
  std::string message;
  std::string csv_name;
};

/// Runs every controller x track x speed cell, in parallel, and returns the
/// results in suite order. A failing cell is recorded with status "error".
/// When out_dir is non-empty, per-cell logs and summary.csv are written there.
std::vector<CellResult> RunBenchmark(const BenchmarkSuite& suite, const std::string& out_dir);

/// Header: controller,track,speed,status,rms_cross_track,max_cross_track,
/// rms_heading,rms_speed_err,mean_abs_steer_rate,lap_time,completion
std::string SummaryCsv(const std::vector<CellResult>& cells);

}  // namespace avtrack
