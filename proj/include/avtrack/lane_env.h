#pragma once

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "avtrack/pid.h"
#include "avtrack/policy.h"
#include "avtrack/track.h"
#include "avtrack/vehicle_model.h"

namespace avtrack {

/// Lane-keeping episode used for reinforcement learning and evolutionary
/// search. Each episode starts at a random point along the track with a small
/// random lateral and heading offset.
struct LaneEnvConfig {
  VehicleParams vehicle;
  double dt = 0.05;
  int max_steps = 300;
  double start_offset = 0.5;      // m, uniform in +/- this
  double start_heading = 0.1;     // rad, uniform in +/- this
  PidGains speed_gains{1.0, 0.1, 0.0};
  double progress_weight = 1.0;   // reward per metre of forward progress
  double cross_track_weight = 1.0;  // penalty per metre of |e_ct| per second
  double off_track = 3.0;         // m, terminates the episode
  double off_track_penalty = 20.0;

  void Validate() const;
};

struct Transition {
  Eigen::VectorXd obs;
  double action = 0.0;    // sampled steer before clipping
  double log_prob = 0.0;  // under the behavior policy
  double reward = 0.0;
  double advantage = 0.0;
  bool terminal = false;  // last step of its episode
};

struct EpisodeResult {
  double reward = 0.0;
  double mean_abs_cross_track = 0.0;
  int steps = 0;
  bool off_track = false;
};

/// Log-density of a Gaussian with the given mean and std.
double GaussianLogProb(double x, double mean, double sigma);

/// Runs one episode. With `explore` the executed steer is a Gaussian sample
/// around the policy mean (clipped to +/- delta_max); otherwise the mean is
/// used. Transitions are appended to `out` when it is non-null.
EpisodeResult RunLaneEpisode(const Policy& policy, const Track& track, const LaneEnvConfig& cfg,
                             std::mt19937_64& rng, bool explore,
                             std::vector<Transition>* out = nullptr);

struct PolicyEvaluation {
  double mean_reward = 0.0;
  double mean_abs_cross_track = 0.0;
};

/// Mean-action evaluation over `episodes` episodes with start states drawn
/// from `seed`.
PolicyEvaluation EvaluatePolicy(const Policy& policy, const Track& track, const LaneEnvConfig& cfg,
                                int episodes, std::uint64_t seed);

}  // namespace avtrack
