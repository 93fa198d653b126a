#pragma once

#include <cstdint>
#include <vector>

#include "avtrack/lane_env.h"
#include "avtrack/policy.h"

namespace avtrack {

/// Pointwise clipped objective min(r A, clip(r, 1 - eps, 1 + eps) A).
/// Throws InvalidInput for r <= 0 or eps < 0.
double PpoSurrogate(double ratio, double advantage, double eps_clip);

struct PpoConfig {
  int iterations = 50;
  int episodes_per_iteration = 8;
  int epochs = 4;
  double learning_rate = 3e-4;
  double eps_clip = 0.2;
  double gamma = 0.99;
  std::uint64_t seed = 0;
  std::vector<int> hidden{16, 16};  // used when no initial policy is given

  void Validate() const;
};

struct PpoIterationStats {
  double mean_episode_reward = 0.0;  // of the rollouts collected this iteration
  double surrogate = 0.0;            // clipped objective after the last epoch
  double first_epoch_max_ratio_dev = 0.0;  // max |r - 1| in the first epoch
};

struct PpoResult {
  Policy policy;  // best policy by rollout reward
  std::vector<PpoIterationStats> history;
};

/// Reward-to-go minus the batch mean, per sample.
std::vector<double> ComputeAdvantages(const std::vector<Transition>& batch, double gamma);

/// Clipped-surrogate policy gradient trained with Adam on full-batch epochs.
/// Single-threaded and bitwise reproducible for a fixed seed.
PpoResult TrainPpo(const Track& track, const LaneEnvConfig& env, Policy initial,
                   const PpoConfig& cfg);

}  // namespace avtrack
