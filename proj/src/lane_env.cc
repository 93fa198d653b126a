#include "avtrack/lane_env.h"

#include <algorithm>
#include <cmath>

#include "avtrack/errors.h"

namespace avtrack {

void LaneEnvConfig::Validate() const {
  vehicle.Validate();
  speed_gains.Validate();
  if (!(dt > 0.0)) throw InvalidInput("env dt must be positive");
  if (max_steps <= 0) throw InvalidInput("env max_steps must be positive");
  if (!(off_track > 0.0)) throw InvalidInput("env off_track must be positive");
  if (start_offset < 0.0 || start_heading < 0.0) throw InvalidInput("env start ranges must be >= 0");
}

double GaussianLogProb(double x, double mean, double sigma) {
  const double z = (x - mean) / sigma;
  return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * kPi);
}

EpisodeResult RunLaneEpisode(const Policy& policy, const Track& track, const LaneEnvConfig& cfg,
                             std::mt19937_64& rng, bool explore, std::vector<Transition>* out) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> along(0.0, track.closed() ? track.length() : 0.5 * track.length());
  std::normal_distribution<double> noise(0.0, 1.0);

  double tangent = 0.0;
  const Waypoint start = track.SampleAt(along(rng), &tangent);
  const double offset = cfg.start_offset * unit(rng);
  VehicleState state;
  state.x = start.x - offset * std::sin(tangent);
  state.y = start.y + offset * std::cos(tangent);
  state.theta = WrapAngle(tangent + cfg.start_heading * unit(rng));
  state.v = start.v_ref;

  PidController speed(cfg.speed_gains, PidConfig{});
  double s_prev = track.Nearest({state.x, state.y}).s;
  EpisodeResult res;
  double sum_abs = 0.0;
  for (int k = 0; k < cfg.max_steps; ++k) {
    const Eigen::VectorXd obs = Observe(track, state, cfg.vehicle);
    const double mean = policy.MeanSteer(obs);
    double action = mean;
    if (explore && policy.sigma > 0.0) action = mean + policy.sigma * noise(rng);
    const double steer = std::clamp(action, -policy.delta_max, policy.delta_max);
    const TrackingErrors cog = ComputeTrackingErrors(track, state, Frame::kCog, cfg.vehicle);
    const double accel =
        std::clamp(speed.Step(cog.speed, cfg.dt), -cfg.vehicle.decel_max, cfg.vehicle.accel_max);
    state = StepKinematic(state, {accel, std::clamp(steer, -cfg.vehicle.steer_max, cfg.vehicle.steer_max)},
                          cfg.vehicle, cfg.dt);

    const NearestResult near = track.Nearest({state.x, state.y});
    double ds = near.s - s_prev;
    if (track.closed()) {
      if (ds > 0.5 * track.length()) ds -= track.length();
      if (ds < -0.5 * track.length()) ds += track.length();
    }
    s_prev = near.s;
    double reward = cfg.progress_weight * ds - cfg.cross_track_weight * near.distance * cfg.dt;
    const bool off = near.distance > cfg.off_track || !IsFinite(state);
    if (off) reward -= cfg.off_track_penalty;

    sum_abs += near.distance;
    res.reward += reward;
    ++res.steps;
    if (out != nullptr) {
      Transition tr;
      tr.obs = obs;
      tr.action = action;
      tr.log_prob = GaussianLogProb(action, mean, std::max(policy.sigma, 1e-12));
      tr.reward = reward;
      out->push_back(std::move(tr));
    }
    if (off) {
      res.off_track = true;
      break;
    }
  }
  if (out != nullptr && !out->empty()) out->back().terminal = true;
  res.mean_abs_cross_track = sum_abs / res.steps;
  return res;
}

PolicyEvaluation EvaluatePolicy(const Policy& policy, const Track& track, const LaneEnvConfig& cfg,
                                int episodes, std::uint64_t seed) {
  if (episodes <= 0) throw InvalidInput("episodes must be positive");
  cfg.Validate();
  std::mt19937_64 rng(seed);
  PolicyEvaluation ev;
  for (int i = 0; i < episodes; ++i) {
    const EpisodeResult r = RunLaneEpisode(policy, track, cfg, rng, false);
    ev.mean_reward += r.reward;
    ev.mean_abs_cross_track += r.mean_abs_cross_track;
  }
  ev.mean_reward /= episodes;
  ev.mean_abs_cross_track /= episodes;
  return ev;
}

}  // namespace avtrack
