#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "avtrack/bc.h"
#include "avtrack/evolve.h"
#include "avtrack/geometric.h"
#include "avtrack/lane_env.h"
#include "avtrack/mpc.h"
#include "avtrack/pid.h"
#include "avtrack/ppo.h"
#include "avtrack/sim.h"
#include "avtrack/track.h"

namespace avtrack {

enum class LateralKind { kBangBang, kPid, kPurePursuit, kStanley, kMpc, kPolicy };

const char* LateralKindName(LateralKind kind);

struct LateralSpec {
  LateralKind kind = LateralKind::kStanley;
  double bang_bang_scale = 0.1;
  Frame bang_bang_frame = Frame::kRearAxle;
  PidGains pid_gains{0.5, 0.0, 0.02};
  PidConfig pid_config{2.0, 1000, 0.5};
  Frame pid_frame = Frame::kFrontAxle;
  std::optional<GainSchedule> schedule;
  PurePursuitConfig pure_pursuit;
  StanleyConfig stanley;
  MpcConfig mpc;
  bool mpc_warm_start = true;
  std::string policy_file;
};

std::unique_ptr<LateralController> MakeLateral(const LateralSpec& spec, const VehicleParams& params);

enum class TrackKind { kStraight, kCircle, kRacetrack, kCsv };

struct TrackSpec {
  std::string name;
  TrackKind kind = TrackKind::kRacetrack;
  double length = 200.0;    // straight
  double radius = 20.0;     // circle, racetrack arcs
  double straight = 100.0;  // racetrack straights
  double v_ref = 8.0;
  double spacing = 0.5;
  std::string path;         // csv
  bool closed = false;      // csv only; generated tracks know their topology
};

Track BuildTrack(const TrackSpec& spec);

/// A single closed-loop run as described by a `simulate` config file.
struct RunSpec {
  SimConfig sim;
  LateralSpec lateral;
  bool track_closed = false;  // topology of a CSV track
};

// All parsers throw InvalidInput for malformed JSON, unknown keys, wrong value
// types or values that fail validation.
RunSpec ParseRunSpec(const std::string& json_text);
LateralSpec ParseLateralSpec(const std::string& json_text);
TrackSpec ParseTrackSpec(const std::string& json_text);

struct BcJob {
  TrackSpec track;
  SimConfig sim;
  LateralSpec expert;
  BcConfig bc;
  std::string log_path;
};
BcJob ParseBcJob(const std::string& json_text);

struct PpoJob {
  TrackSpec track;
  LaneEnvConfig env;
  PpoConfig ppo;
  std::string log_path;
};
PpoJob ParsePpoJob(const std::string& json_text);

struct EvolveJob {
  TrackSpec track;
  LaneEnvConfig env;
  EvolveConfig evolve;
  std::vector<int> hidden{8};
  int eval_episodes = 4;
  std::string log_path;
};
EvolveJob ParseEvolveJob(const std::string& json_text);

std::string ReadTextFile(const std::string& path);

}  // namespace avtrack
