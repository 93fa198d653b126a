#include "avtrack/pid.h"

#include <algorithm>
#include <cmath>

#include "avtrack/errors.h"

namespace avtrack {

double BangBangStep(double measurement, double setpoint, double u_max, double u_min,
                    double scale) {
  if (!(u_min < u_max)) throw InvalidInput("bang-bang requires u_min < u_max");
  if (measurement < setpoint) return scale * u_max;
  if (measurement > setpoint) return scale * u_min;
  return 0.0;
}

void PidGains::Validate() const {
  for (double g : {kp, ki, kd}) {
    if (!std::isfinite(g) || g < 0.0) throw InvalidInput("PID gains must be finite and >= 0");
  }
}

void PidConfig::Validate() const {
  if (!(integral_clamp >= 0.0)) throw InvalidInput("integral_clamp must be >= 0");
  if (buffer_len == 0) throw InvalidInput("buffer_len must be >= 1");
  if (!(derivative_filter >= 0.0 && derivative_filter < 1.0)) {
    throw InvalidInput("derivative_filter must be in [0, 1)");
  }
}

double PidStep(PidState& state, const PidGains& gains, const PidConfig& config, double error,
               double dt) {
  if (!std::isfinite(dt) || dt <= 0.0) throw InvalidInput("PID dt must be positive");
  if (!std::isfinite(error)) throw InvalidInput("PID error must be finite");

  state.buffer.push_back({error, dt});
  state.window_sum += error * dt;
  while (state.buffer.size() > config.buffer_len) {
    state.window_sum -= state.buffer.front().error * state.buffer.front().dt;
    state.buffer.pop_front();
  }
  // Re-sum periodically so the running sum does not drift from the window.
  if (++state.pushes_since_resum >= config.buffer_len) {
    double sum = 0.0;
    for (const auto& s : state.buffer) sum += s.error * s.dt;
    state.window_sum = sum;
    state.pushes_since_resum = 0;
  }
  state.integral = std::clamp(state.window_sum, -config.integral_clamp, config.integral_clamp);

  double derivative = 0.0;
  if (state.has_prev) {
    const double raw = (error - state.prev_error) / dt;
    const double a = config.derivative_filter;
    derivative = a * state.filtered_derivative + (1.0 - a) * raw;
  }
  state.filtered_derivative = derivative;
  state.prev_error = error;
  state.has_prev = true;

  return gains.kp * error + gains.ki * state.integral + gains.kd * derivative;
}

void OutputShaper::Validate() const {
  if (!(min < max)) throw InvalidInput("shaper requires min < max");
  if (!(max_rate > 0.0)) throw InvalidInput("shaper max_rate must be positive");
  if (!(deadband >= 0.0)) throw InvalidInput("shaper deadband must be >= 0");
}

double ShapeOutput(const OutputShaper& shaper, double raw, double prev, double error, double dt) {
  if (!std::isfinite(dt) || dt <= 0.0) throw InvalidInput("shaper dt must be positive");
  double u = std::abs(error) < shaper.deadband ? 0.0 : raw;
  u = std::clamp(u, shaper.min, shaper.max);
  if (std::isfinite(shaper.max_rate)) {
    const double step = shaper.max_rate * dt;
    u = prev + std::clamp(u - prev, -step, step);
  }
  return u;
}

void GainSchedule::Validate() const {
  if (breakpoints.empty()) throw InvalidInput("gain schedule is empty");
  for (std::size_t i = 0; i < breakpoints.size(); ++i) {
    breakpoints[i].gains.Validate();
    if (i > 0 && !(breakpoints[i].at > breakpoints[i - 1].at)) {
      throw InvalidInput("gain schedule breakpoints must be strictly increasing");
    }
  }
}

PidGains ScheduleGains(const GainSchedule& schedule, double value) {
  if (schedule.breakpoints.empty()) throw InvalidInput("gain schedule is empty");
  const auto& bp = schedule.breakpoints;
  auto it = std::upper_bound(bp.begin(), bp.end(), value,
                             [](double v, const GainBreakpoint& b) { return v < b.at; });
  if (it == bp.begin()) return bp.front().gains;
  return std::prev(it)->gains;
}

}  // namespace avtrack
