#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "avtrack/mlp.h"
#include "avtrack/sim.h"
#include "avtrack/track.h"
#include "avtrack/vehicle_model.h"

namespace avtrack {

/// Observation layout: front-axle cross-track error, front-axle heading error,
/// v / 10, then 10 * curvature at 0, 5 and 10 m ahead of the front axle.
inline constexpr int kObservationDim = 6;

Eigen::VectorXd Observe(const Track& track, const VehicleState& state, const VehicleParams& params);

/// Steering policy. The network output is squashed by tanh and scaled by
/// delta_max, so the mean steer always lies in [-delta_max, delta_max].
struct Policy {
  Mlp net;
  double delta_max = DegToRad(70.0);
  double sigma = 0.1 * DegToRad(70.0);  // exploration std, rad

  double MeanSteer(const Eigen::VectorXd& obs) const;
};

/// Hidden layers use tanh; the single output uses tanh. sigma = 0.1 * delta_max.
Policy CreatePolicy(const std::vector<int>& hidden, double delta_max, std::mt19937_64& rng);

/// Deterministic (mean-action) policy as a lateral controller.
class PolicyLateral : public LateralController {
 public:
  explicit PolicyLateral(Policy policy) : policy_(std::move(policy)) {}
  LateralCommand Steer(const SimContext& ctx) override;

 private:
  Policy policy_;
};

// Binary layout, all integers u32 and floats f64, little-endian:
//   "AVCB1" | layer_count | per layer: in, out, activation |
//   delta_max | sigma | per layer: w row-major (out x in), then b
void SavePolicy(std::ostream& out, const Policy& policy);
void SavePolicyFile(const std::string& path, const Policy& policy);
/// Throws InvalidInput for a bad magic, truncated data or inconsistent shapes.
Policy LoadPolicy(std::istream& in);
Policy LoadPolicyFile(const std::string& path);

/// Appends `iter,loss_or_reward,seed` rows; writes the header for a new file.
void AppendTrainingLog(const std::string& path, const std::vector<double>& values,
                       std::uint64_t seed);

}  // namespace avtrack
