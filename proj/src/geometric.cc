#include "avtrack/geometric.h"

#include <algorithm>
#include <cmath>

#include "avtrack/errors.h"

namespace avtrack {

void PurePursuitConfig::Validate() const {
  if (!(k_v > 0.0)) throw InvalidInput("k_v must be positive");
  if (!(d_l_min > 0.0 && d_l_min <= d_l_max)) throw InvalidInput("need 0 < d_l_min <= d_l_max");
  if (!(d_l_fixed > 0.0)) throw InvalidInput("d_l_fixed must be positive");
  if (!(delta_max > 0.0)) throw InvalidInput("delta_max must be positive");
}

double PurePursuitConfig::LookaheadDistance(double v_f) const {
  if (!coupled) return d_l_fixed;
  return std::clamp(k_v * std::max(v_f, 0.0), d_l_min, d_l_max);
}

void StanleyConfig::Validate() const {
  if (!(k_delta > 0.0)) throw InvalidInput("k_delta must be positive");
  if (!(k_s > 0.0)) throw InvalidInput("k_s must be positive");
  if (!(k_d >= 0.0)) throw InvalidInput("k_d must be >= 0");
  if (!(delta_max > 0.0)) throw InvalidInput("delta_max must be positive");
}

double PurePursuitSteer(const PurePursuitConfig& cfg, double alpha, double v_f,
                        const VehicleParams& params) {
  const double d_l = cfg.LookaheadDistance(v_f);
  const double delta = std::atan(2.0 * params.wheelbase * std::sin(alpha) / d_l);
  return std::clamp(delta, -cfg.delta_max, cfg.delta_max);
}

double StanleyRaw(const StanleyConfig& cfg, const TrackingErrors& errors, double v_f) {
  return errors.heading +
         std::atan(cfg.k_delta * errors.cross_track / (cfg.k_s + cfg.k_d * std::max(v_f, 0.0)));
}

double StanleySteer(const StanleyConfig& cfg, const TrackingErrors& errors, double v_f) {
  return std::clamp(StanleyRaw(cfg, errors, v_f), -cfg.delta_max, cfg.delta_max);
}

double PurePursuitControl(const PurePursuitConfig& cfg, const Track& track,
                          const VehicleState& state, const VehicleParams& params,
                          LookaheadStatus* status) {
  const Point2 rear = FramePoint(state, Frame::kRearAxle, params);
  const LookaheadResult la = track.Lookahead(rear, state.theta, cfg.LookaheadDistance(state.v));
  if (status != nullptr) *status = la.status;
  return PurePursuitSteer(cfg, la.alpha, state.v, params);
}

double StanleyControl(const StanleyConfig& cfg, const Track& track, const VehicleState& state,
                      const VehicleParams& params) {
  const TrackingErrors e = ComputeTrackingErrors(track, state, Frame::kFrontAxle, params);
  return StanleySteer(cfg, e, state.v);
}

}  // namespace avtrack
