#pragma once

#include "avtrack/track.h"
#include "avtrack/vehicle_model.h"

namespace avtrack {

struct PurePursuitConfig {
  double k_v = 0.5;          // lookahead gain, s
  double d_l_min = 2.0;      // m
  double d_l_max = 20.0;     // m
  double delta_max = DegToRad(70.0);
  bool coupled = true;       // false: fixed lookahead `d_l_fixed`
  double d_l_fixed = 5.0;    // m, used when !coupled

  void Validate() const;
  /// Lookahead distance for the given forward speed.
  double LookaheadDistance(double v_f) const;
};

struct StanleyConfig {
  double k_delta = 2.5;  // cross-track gain, 1/s
  double k_s = 1.0;      // softening, m/s
  double k_d = 1.0;      // velocity damping
  double delta_max = DegToRad(70.0);

  void Validate() const;
};

/// atan(2 L sin(alpha) / d_l), clipped to +/- delta_max.
double PurePursuitSteer(const PurePursuitConfig& cfg, double alpha, double v_f,
                        const VehicleParams& params);

/// Stanley law before clipping: e_psi + atan(k_delta e_delta / (k_s + k_d v_f)).
double StanleyRaw(const StanleyConfig& cfg, const TrackingErrors& errors, double v_f);

/// Clipped Stanley law; errors must be measured from the front axle.
double StanleySteer(const StanleyConfig& cfg, const TrackingErrors& errors, double v_f);

/// Convenience wrappers that measure errors from the CoG state.
double PurePursuitControl(const PurePursuitConfig& cfg, const Track& track,
                          const VehicleState& state, const VehicleParams& params,
                          LookaheadStatus* status = nullptr);
double StanleyControl(const StanleyConfig& cfg, const Track& track, const VehicleState& state,
                      const VehicleParams& params);

}  // namespace avtrack
