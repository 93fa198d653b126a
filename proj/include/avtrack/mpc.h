#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "avtrack/track.h"
#include "avtrack/vehicle_model.h"

namespace avtrack {

struct MpcWeights {
  double pos = 1.0;       // squared position error, 1/m^2
  double head = 1.0;      // squared heading error, 1/rad^2
  double vel = 0.1;       // squared speed error
  double d_accel = 0.01;  // squared accel increment
  double d_steer = 5.0;   // squared steer increment
};

struct MpcBounds {
  // Hard limits (never violated by any iterate).
  double accel_min = -6.0;
  double accel_max = 3.0;
  double steer_max = DegToRad(70.0);
  // Soft limits, penalised quadratically by `penalty`.
  double accel_rate_max = 10.0;  // m/s^3
  double steer_rate_max = 1.0;   // rad/s
  double speed_max = 40.0;       // m/s
  double penalty = 100.0;
};

struct MpcOptimizerOptions {
  int max_iter = 200;
  double tol = 1e-7;
  std::uint32_t seed = 0;
  // Seed the search with constant-steer candidates across the steering range.
  int coarse_steer_candidates = 9;
};

struct MpcConfig {
  double ts = 0.05;
  int p = 20;
  int m = 4;
  MpcWeights weights;
  MpcBounds bounds;
  MpcOptimizerOptions opt;
  int latency_steps = 0;  // known actuation delay, in controller steps

  /// Throws InvalidInput when Ts <= 0, m not in [1, p], a weight is negative
  /// or the tolerance is not positive.
  void Validate() const;
};

/// m (accel, steer) pairs; step i >= m reuses the last pair.
using ControlSequence = std::vector<ControlInput>;

struct PredictedTrajectory {
  std::vector<VehicleState> states;  // p future states
  std::vector<double> stage_costs;   // per-step tracking cost, filled by StageCost
};

const ControlInput& ControlAt(const ControlSequence& seq, int step);

/// Rolls the kinematic model p steps at Ts.
PredictedTrajectory Predict(const VehicleParams& params, const VehicleState& state,
                            const ControlSequence& seq, const MpcConfig& cfg);

/// Weighted squared tracking errors over steps 1..p plus weighted squared
/// control increments over steps 0..p-1 (first increment measured from prev_u),
/// plus soft-limit penalties. Throws InvalidInput when refs.size() != p or
/// pred.states.size() != p. When per_step is given it receives the tracking
/// cost of each predicted step.
double StageCost(const PredictedTrajectory& pred, const std::vector<VehicleState>& refs,
                 const ControlSequence& seq, const ControlInput& prev_u, const MpcConfig& cfg,
                 std::vector<double>* per_step = nullptr);

enum class OptimizeStatus { kConverged, kIterationCapped };

struct MpcSolution {
  ControlSequence seq;
  PredictedTrajectory pred;
  double cost = 0.0;
  OptimizeStatus status = OptimizeStatus::kConverged;
  int iterations = 0;
  int evaluations = 0;
  std::vector<double> cost_history;  // best cost after each iteration
  // Every iterate visited stayed within the hard bounds.
  bool iterates_in_bounds = true;
};

/// Bounded local minimisation of StageCost over the 2m control values by a
/// projected coordinate pattern search. Deterministic for fixed inputs and
/// seed. Never throws for valid inputs.
MpcSolution Optimize(const VehicleParams& params, const VehicleState& state,
                     const std::vector<VehicleState>& refs, const ControlInput& prev_u,
                     const MpcConfig& cfg, const ControlSequence* warm_start = nullptr);

/// p reference states spaced v_ref * Ts in arc length ahead of the nearest
/// point. On a finite track references past the end extend the final segment
/// in a straight line. Sets *end_of_track when no path is left ahead.
std::vector<VehicleState> BuildReferences(const Track& track, const VehicleState& state,
                                          const MpcConfig& cfg, bool* end_of_track = nullptr);

struct MpcStepResult {
  ControlInput u;
  bool end_of_track = false;
  int iterations = 0;
  double cost = 0.0;
};

/// Receding-horizon controller: one instance per vehicle.
class MpcController {
 public:
  MpcController(MpcConfig cfg, VehicleParams params, bool warm_start = true);

  MpcStepResult Step(const VehicleState& state, const Track& track);
  void Reset();

  const MpcConfig& config() const { return cfg_; }
  const std::optional<MpcSolution>& last_solution() const { return last_; }

 private:
  MpcConfig cfg_;
  VehicleParams params_;
  bool warm_start_;
  ControlInput prev_u_;
  std::optional<MpcSolution> last_;
  std::deque<ControlInput> pending_;  // issued but not yet actuated
};

struct IntRange {
  int lo = 0;
  int hi = 0;
};

struct DoubleRange {
  double lo = 0.0;
  double hi = 0.0;
};

/// Ts in [5%, 10%] of the open-loop rise time.
DoubleRange SampleTimeRange(double rise_time);
/// p in [t_s/Ts, 1.5 t_s/Ts], rounded to the nearest integer.
IntRange PredictionHorizonRange(double settling_time, double ts);
/// m in [10%, 20%] of p, rounded up, at least 1.
IntRange ControlHorizonRange(int p);
/// Widest m range over a p range: [10% of p_lo, 20% of p_hi].
IntRange ControlHorizonRange(int p_lo, int p_hi);

struct MpcDesign {
  DoubleRange ts;
  IntRange p;
  IntRange m;
};

/// Sizing rules chained together: Ts range from t_r, p range from t_s at the
/// Ts midpoint, m range from the p range. Throws InvalidInput for non-positive
/// times.
MpcDesign DesignParams(double rise_time, double settling_time);

}  // namespace avtrack
