#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "avtrack/geometric.h"
#include "avtrack/mpc.h"
#include "avtrack/pid.h"
#include "avtrack/track.h"
#include "avtrack/vehicle_model.h"

namespace avtrack {

enum class ModelKind { kKinematic, kDynamic };

enum class CouplingMode { kDecoupled, kLongDominant, kLatDominant, kMutual };

struct CouplingConfig {
  CouplingMode mode = CouplingMode::kDecoupled;
  double c_long = 8.0;     // m/s; steering limit halves at this speed
  double c_lat = 0.2;      // rad; speed limit halves at this |steer| * lat_scale
  double lat_scale = 1.0;
  double v_max = 30.0;     // m/s, nominal speed ceiling
  double w_long = 0.5;     // mutual mode: weight of the speed -> steering law
  double w_lat = 0.5;      // mutual mode: weight of the steering -> speed law
};

struct EffectiveLimits {
  double v_max = 0.0;
  double steer_max = 0.0;
};

/// Mutual limiting between the longitudinal and lateral loops using the
/// smooth inverse law c / (c + x).
EffectiveLimits CoupleLimits(const CouplingConfig& cfg, double v, double steer_cmd,
                             double steer_max);

/// What a lateral controller sees each step.
struct SimContext {
  const Track& track;
  const VehicleState& state;
  const VehicleParams& params;
  const TrackingErrors& errors;  // CoG frame
  double t = 0.0;
  double dt = 0.0;
};

struct LateralCommand {
  double steer = 0.0;
  std::optional<double> accel;  // set by controllers that also plan speed
  bool end_of_track = false;
};

class LateralController {
 public:
  virtual ~LateralController() = default;
  virtual LateralCommand Steer(const SimContext& ctx) = 0;
  virtual void Reset() {}
};

/// Switches between +/- scale * steer_max on the sign of the cross-track
/// error measured at `frame`.
class BangBangLateral : public LateralController {
 public:
  BangBangLateral(double steer_max, double scale, Frame frame = Frame::kRearAxle)
      : steer_max_(steer_max), scale_(scale), frame_(frame) {}
  LateralCommand Steer(const SimContext& ctx) override;

 private:
  double steer_max_;
  double scale_;
  Frame frame_;
};

/// PID on the cross-track error, optionally gain-scheduled on speed.
class PidLateral : public LateralController {
 public:
  PidLateral(PidGains gains, PidConfig config, Frame frame = Frame::kFrontAxle,
             std::optional<GainSchedule> schedule = std::nullopt);
  LateralCommand Steer(const SimContext& ctx) override;
  void Reset() override { pid_.Reset(); }

 private:
  PidController pid_;
  Frame frame_;
  std::optional<GainSchedule> schedule_;
};

class PurePursuitLateral : public LateralController {
 public:
  explicit PurePursuitLateral(PurePursuitConfig cfg) : cfg_(cfg) { cfg_.Validate(); }
  LateralCommand Steer(const SimContext& ctx) override;

 private:
  PurePursuitConfig cfg_;
};

class StanleyLateral : public LateralController {
 public:
  explicit StanleyLateral(StanleyConfig cfg) : cfg_(cfg) { cfg_.Validate(); }
  LateralCommand Steer(const SimContext& ctx) override;

 private:
  StanleyConfig cfg_;
};

/// Runs the MPC every round(Ts / dt) simulation steps and holds the command
/// in between.
class MpcLateral : public LateralController {
 public:
  MpcLateral(MpcConfig cfg, VehicleParams params, bool warm_start = true);
  LateralCommand Steer(const SimContext& ctx) override;
  void Reset() override;

  int total_iterations() const { return total_iterations_; }
  int solves() const { return solves_; }

 private:
  MpcController mpc_;
  long step_ = 0;
  LateralCommand held_;
  int total_iterations_ = 0;
  int solves_ = 0;
};

enum class RunStatus { kCompleted, kMaxSteps, kDiverged, kOffTrack, kEndOfTrack };

const char* RunStatusName(RunStatus status);

struct InitialState {
  std::optional<VehicleState> pose;  // explicit start; otherwise on the track start
  double lateral_offset = 0.0;       // left-positive offset from the track start
  double heading_offset = 0.0;       // rad
  std::optional<double> speed;       // defaults to the v_ref at the start
};

struct SimConfig {
  ModelKind model = ModelKind::kKinematic;
  double dt = 0.02;
  long max_steps = 20000;
  InitialState initial;
  std::uint64_t seed = 0;
  VehicleParams vehicle;
  CouplingConfig coupling;
  PidGains speed_gains{1.0, 0.1, 0.0};
  PidConfig speed_pid;
  bool longitudinal_from_lateral = false;  // use the lateral controller's accel
  OutputShaper steer_shaper;               // dead-band / rate limit on steering
  double off_track = 5.0;                  // m
  int actuation_delay_steps = 0;           // plant applies commands this many steps late
  int dynamic_substeps = 10;
  double dynamic_switch_speed = 1.0;       // m/s; kinematic plant below this
  bool stop_on_lap = true;                 // false: closed tracks keep lapping; finite ones end as end_of_track

  void Validate() const;
};

struct RunRow {
  double t = 0.0;
  VehicleState state;
  ControlInput control;
  TrackingErrors errors;
  double cost = 0.0;
  double progress = 0.0;   // fraction of track length traversed, [0, 1]
  double steer_limit = 0.0;
  double accel_min = 0.0;
  double accel_max = 0.0;
};

struct Metrics {
  double rms_cross_track = 0.0;
  double max_cross_track = 0.0;
  double rms_heading = 0.0;
  double rms_speed_err = 0.0;
  double mean_abs_steer_rate = 0.0;
  std::optional<double> lap_time;
  double completion = 0.0;
};

struct RunRecord {
  std::vector<RunRow> rows;
  Metrics metrics;
  RunStatus status = RunStatus::kMaxSteps;
  bool diverged = false;
  std::string message;
};

/// RMS/max statistics over the rows. lap_time is the time of the first row
/// with progress >= 1. Throws InvalidInput for empty rows.
Metrics ComputeMetrics(const std::vector<RunRow>& rows);

VehicleState InitialPose(const SimConfig& cfg, const Track& track);

/// Closed-loop episode. Never throws for controller failures or non-finite
/// states; those end the run flagged `diverged`.
RunRecord Simulate(const SimConfig& cfg, const Track& track, LateralController& lateral);

/// CSV with header t,x,y,theta,v,accel,steer,e_ct,e_head,e_v.
void WriteRunCsv(std::ostream& out, const RunRecord& record);

/// Fixed-format number for CSV output.
std::string FormatNumber(double v);

}  // namespace avtrack
