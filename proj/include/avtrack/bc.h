#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "avtrack/policy.h"
#include "avtrack/sim.h"

namespace avtrack {

struct BcConfig {
  std::vector<int> hidden{32, 32};
  int epochs = 150;
  int batch_size = 128;
  double learning_rate = 3e-3;
  std::uint64_t seed = 0;
  int episodes = 4;                 // data-collection runs of the expert
  double perturbation_std = 0.03;   // rad added to the executed steer after the first run
  double start_offset = 0.5;        // m, lateral start offset range after the first run
  double near_zero_steer = 0.01;    // rad; labels below this count as "straight"
  double max_near_zero_fraction = 0.5;

  void Validate() const;
};

struct BcDataset {
  Eigen::MatrixXd obs;    // kObservationDim x n
  Eigen::VectorXd steer;  // expert labels, rad
};

/// Drives the simulation with the expert and records (observation, expert
/// steer) pairs. Runs after the first inject Gaussian steering noise and a
/// random start offset so the data covers recoveries; the labels are always
/// the expert's own command. Throws DataCollectionError when an expert run
/// does not complete.
BcDataset CollectDemonstrations(LateralController& expert, const Track& track,
                                const SimConfig& sim, const BcConfig& cfg);

/// Down-samples near-zero labels so they make up at most the configured
/// fraction of the data. Order of the kept samples is preserved.
BcDataset BalanceDataset(const BcDataset& data, const BcConfig& cfg, std::mt19937_64& rng);

struct BcResult {
  Policy policy;
  std::vector<double> epoch_loss;  // full-dataset mse after each epoch
  std::size_t samples = 0;
};

/// Mini-batch MSE regression of the normalized steer with Adam.
BcResult TrainBehaviorClone(const BcDataset& data, Policy initial, const BcConfig& cfg);

/// Collect, balance and train. Deterministic for a fixed seed.
BcResult CloneBehavior(LateralController& expert, const Track& track, const SimConfig& sim,
                       const BcConfig& cfg);

}  // namespace avtrack
