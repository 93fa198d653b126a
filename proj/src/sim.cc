#include "avtrack/sim.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <exception>
#include <ostream>

#include "avtrack/errors.h"

namespace avtrack {

EffectiveLimits CoupleLimits(const CouplingConfig& cfg, double v, double steer_cmd,
                             double steer_max) {
  const double speed_law = cfg.c_long / (cfg.c_long + std::abs(v));
  const double steer_law = cfg.c_lat / (cfg.c_lat + std::abs(steer_cmd) * cfg.lat_scale);
  EffectiveLimits lim{cfg.v_max, steer_max};
  switch (cfg.mode) {
    case CouplingMode::kDecoupled:
      break;
    case CouplingMode::kLongDominant:
      lim.steer_max = steer_max * speed_law;
      break;
    case CouplingMode::kLatDominant:
      lim.v_max = cfg.v_max * steer_law;
      break;
    case CouplingMode::kMutual:
      lim.steer_max = steer_max * ((1.0 - cfg.w_long) + cfg.w_long * speed_law);
      lim.v_max = cfg.v_max * ((1.0 - cfg.w_lat) + cfg.w_lat * steer_law);
      break;
  }
  return lim;
}

LateralCommand BangBangLateral::Steer(const SimContext& ctx) {
  const double e = frame_ == Frame::kCog
                       ? ctx.errors.cross_track
                       : ComputeTrackingErrors(ctx.track, ctx.state, frame_, ctx.params).cross_track;
  // Vehicle's left-positive offset from the path is -e.
  return {BangBangStep(-e, 0.0, steer_max_, -steer_max_, scale_), {}, false};
}

PidLateral::PidLateral(PidGains gains, PidConfig config, Frame frame,
                       std::optional<GainSchedule> schedule)
    : pid_(gains, config), frame_(frame), schedule_(std::move(schedule)) {
  if (schedule_.has_value()) schedule_->Validate();
}

LateralCommand PidLateral::Steer(const SimContext& ctx) {
  if (schedule_.has_value()) pid_.set_gains(ScheduleGains(*schedule_, ctx.state.v));
  const double e = frame_ == Frame::kCog
                       ? ctx.errors.cross_track
                       : ComputeTrackingErrors(ctx.track, ctx.state, frame_, ctx.params).cross_track;
  return {pid_.Step(e, ctx.dt), {}, false};
}

LateralCommand PurePursuitLateral::Steer(const SimContext& ctx) {
  return {PurePursuitControl(cfg_, ctx.track, ctx.state, ctx.params), {}, false};
}

LateralCommand StanleyLateral::Steer(const SimContext& ctx) {
  return {StanleyControl(cfg_, ctx.track, ctx.state, ctx.params), {}, false};
}

MpcLateral::MpcLateral(MpcConfig cfg, VehicleParams params, bool warm_start)
    : mpc_(cfg, params, warm_start) {}

void MpcLateral::Reset() {
  mpc_.Reset();
  step_ = 0;
  held_ = {};
  total_iterations_ = 0;
  solves_ = 0;
}

LateralCommand MpcLateral::Steer(const SimContext& ctx) {
  const long every = std::max(1L, std::lround(mpc_.config().ts / ctx.dt));
  if (step_ % every == 0) {
    const MpcStepResult r = mpc_.Step(ctx.state, ctx.track);
    held_ = {r.u.steer, r.u.accel, r.end_of_track};
    total_iterations_ += r.iterations;
    ++solves_;
  }
  ++step_;
  return held_;
}

const char* RunStatusName(RunStatus status) {
  switch (status) {
    case RunStatus::kCompleted:
      return "completed";
    case RunStatus::kMaxSteps:
      return "max_steps";
    case RunStatus::kDiverged:
      return "diverged";
    case RunStatus::kOffTrack:
      return "off_track";
    case RunStatus::kEndOfTrack:
      return "end_of_track";
  }
  return "unknown";
}

void SimConfig::Validate() const {
  if (!(dt > 0.0)) throw InvalidInput("dt must be positive");
  if (max_steps <= 0) throw InvalidInput("max_steps must be positive");
  if (!(off_track > 0.0)) throw InvalidInput("off_track threshold must be positive");
  if (actuation_delay_steps < 0) throw InvalidInput("actuation_delay_steps must be >= 0");
  if (dynamic_substeps < 1) throw InvalidInput("dynamic_substeps must be >= 1");
  vehicle.Validate();
  speed_gains.Validate();
  speed_pid.Validate();
  steer_shaper.Validate();
}

Metrics ComputeMetrics(const std::vector<RunRow>& rows) {
  if (rows.empty()) throw InvalidInput("cannot compute metrics of an empty run");
  Metrics m;
  double sum_ct = 0.0;
  double sum_head = 0.0;
  double sum_speed = 0.0;
  for (const auto& r : rows) {
    sum_ct += r.errors.cross_track * r.errors.cross_track;
    sum_head += r.errors.heading * r.errors.heading;
    sum_speed += r.errors.speed * r.errors.speed;
    m.max_cross_track = std::max(m.max_cross_track, std::abs(r.errors.cross_track));
    m.completion = std::max(m.completion, std::clamp(r.progress, 0.0, 1.0));
    if (!m.lap_time.has_value() && r.progress >= 1.0) m.lap_time = r.t;
  }
  const auto n = static_cast<double>(rows.size());
  m.rms_cross_track = std::sqrt(sum_ct / n);
  m.rms_heading = std::sqrt(sum_head / n);
  m.rms_speed_err = std::sqrt(sum_speed / n);
  if (rows.size() > 1) {
    double rate = 0.0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const double dt = rows[i].t - rows[i - 1].t;
      if (dt > 0.0) rate += std::abs(rows[i].control.steer - rows[i - 1].control.steer) / dt;
    }
    m.mean_abs_steer_rate = rate / static_cast<double>(rows.size() - 1);
  }
  return m;
}

VehicleState InitialPose(const SimConfig& cfg, const Track& track) {
  const InitialState& init = cfg.initial;
  if (init.pose.has_value()) {
    VehicleState s = *init.pose;
    s.theta = WrapAngle(s.theta);
    return s;
  }
  double tangent = 0.0;
  const Waypoint start = track.SampleAt(0.0, &tangent);
  VehicleState s;
  s.x = start.x - init.lateral_offset * std::sin(tangent);
  s.y = start.y + init.lateral_offset * std::cos(tangent);
  s.theta = WrapAngle(tangent + init.heading_offset);
  s.v = init.speed.value_or(start.v_ref);
  return s;
}

namespace {

double WrappedDelta(double ds, double length) {
  if (ds > 0.5 * length) return ds - length;
  if (ds < -0.5 * length) return ds + length;
  return ds;
}

}  // namespace

RunRecord Simulate(const SimConfig& cfg, const Track& track, LateralController& lateral) {
  cfg.Validate();
  const VehicleParams& params = cfg.vehicle;
  RunRecord rec;
  rec.rows.reserve(static_cast<std::size_t>(std::min<long>(cfg.max_steps, 100000)));

  DynamicState dyn;
  dyn.pose = InitialPose(cfg, track);
  PidController speed_pid(cfg.speed_gains, cfg.speed_pid);
  lateral.Reset();

  std::deque<ControlInput> delay(static_cast<std::size_t>(cfg.actuation_delay_steps), ControlInput{});
  double prev_steer = 0.0;
  double t = 0.0;
  const Point2 start_pt{dyn.pose.x, dyn.pose.y};
  const double s_start = track.Nearest(start_pt).s;
  double s_prev = s_start;
  double progress_m = 0.0;
  const double span = track.closed() ? track.length() : std::max(track.length() - s_start, 1e-9);
  rec.status = RunStatus::kMaxSteps;

  auto finish = [&](RunStatus status, std::string msg = {}) {
    rec.status = status;
    rec.diverged = status == RunStatus::kDiverged;
    rec.message = std::move(msg);
  };

  for (long step = 0; step < cfg.max_steps; ++step) {
    const VehicleState& state = dyn.pose;
    TrackingErrors errors;
    LateralCommand cmd;
    RunRow row;
    try {
      errors = ComputeTrackingErrors(track, state, Frame::kCog, params);
      const SimContext ctx{track, state, params, errors, t, cfg.dt};
      cmd = lateral.Steer(ctx);
      if (cmd.end_of_track) {
        finish(RunStatus::kEndOfTrack);
        break;
      }
      if (!std::isfinite(cmd.steer) || (cmd.accel.has_value() && !std::isfinite(*cmd.accel))) {
        finish(RunStatus::kDiverged, "controller produced a non-finite command");
        break;
      }
      const EffectiveLimits lim = CoupleLimits(cfg.coupling, state.v, cmd.steer, params.steer_max);
      double accel = 0.0;
      if (cfg.longitudinal_from_lateral && cmd.accel.has_value()) {
        accel = *cmd.accel;
      } else {
        const double v_target = std::min(errors.speed + state.v, lim.v_max);
        accel = speed_pid.Step(v_target - state.v, cfg.dt);
      }
      accel = std::clamp(accel, -params.decel_max, params.accel_max);
      double steer = ShapeOutput(cfg.steer_shaper, cmd.steer, prev_steer, errors.cross_track, cfg.dt);
      steer = std::clamp(steer, -lim.steer_max, lim.steer_max);
      prev_steer = steer;

      row.t = t;
      row.state = state;
      row.control = {accel, steer};
      row.errors = errors;
      row.cost = errors.cross_track * errors.cross_track + errors.heading * errors.heading +
                 0.1 * errors.speed * errors.speed;
      row.progress = progress_m / span;
      row.steer_limit = lim.steer_max;
      row.accel_min = -params.decel_max;
      row.accel_max = params.accel_max;
      rec.rows.push_back(row);

      ControlInput applied = row.control;
      if (!delay.empty()) {
        delay.push_back(applied);
        applied = delay.front();
        delay.pop_front();
      }
      if (cfg.model == ModelKind::kKinematic) {
        dyn.pose = StepKinematic(dyn.pose, applied, params, cfg.dt);
      } else {
        dyn = StepDynamic(dyn, applied, params, cfg.dt, cfg.dynamic_substeps,
                          cfg.dynamic_switch_speed);
      }
    } catch (const std::exception& ex) {
      finish(RunStatus::kDiverged, ex.what());
      break;
    }
    t += cfg.dt;

    if (!IsFinite(dyn.pose)) {
      finish(RunStatus::kDiverged, "state became non-finite");
      break;
    }
    const Point2 pos{dyn.pose.x, dyn.pose.y};
    const NearestResult near = track.Nearest(pos);
    progress_m += track.closed() ? WrappedDelta(near.s - s_prev, track.length()) : near.s - s_prev;
    s_prev = near.s;

    const bool lap_done = track.closed() ? progress_m >= track.length()
                                         : track.FinalSegmentParam(pos) >= 1.0;
    if (lap_done && cfg.stop_on_lap) {
      progress_m = span;
      finish(RunStatus::kCompleted);
      break;
    }
    if (lap_done && !track.closed()) {
      // No path left to follow on a finite track.
      progress_m = span;
      finish(RunStatus::kEndOfTrack);
      break;
    }
    if (near.distance > cfg.off_track) {
      finish(RunStatus::kOffTrack);
      break;
    }
  }

  if (rec.rows.empty()) {
    rec.metrics = Metrics{};
    return rec;
  }
  rec.metrics = ComputeMetrics(rec.rows);
  rec.metrics.completion = std::clamp(progress_m / span, 0.0, 1.0);
  if (rec.status == RunStatus::kCompleted) rec.metrics.lap_time = t;
  return rec;
}

std::string FormatNumber(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void WriteRunCsv(std::ostream& out, const RunRecord& record) {
  out << "t,x,y,theta,v,accel,steer,e_ct,e_head,e_v\n";
  for (const auto& r : record.rows) {
    out << FormatNumber(r.t) << ',' << FormatNumber(r.state.x) << ',' << FormatNumber(r.state.y)
        << ',' << FormatNumber(r.state.theta) << ',' << FormatNumber(r.state.v) << ','
        << FormatNumber(r.control.accel) << ',' << FormatNumber(r.control.steer) << ','
        << FormatNumber(r.errors.cross_track) << ',' << FormatNumber(r.errors.heading) << ','
        << FormatNumber(r.errors.speed) << '\n';
  }
}

}  // namespace avtrack
