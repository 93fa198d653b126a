#pragma once

#include <cstddef>
#include <deque>
#include <limits>
#include <vector>

namespace avtrack {

// Effect of raising each gain on the closed-loop step response (tuning aid):
//
//   gain | rise time    | overshoot | settling time | steady-state error
//   kp   | decrease     | increase  | small change  | decrease
//   ki   | decrease     | increase  | increase      | eliminate
//   kd   | small change | decrease  | decrease      | small change
//
// Tuning order that usually works: ki = kd = 0, raise kp until oscillation,
// add kd to damp it, then add a small ki for the residual offset.

/// Three-state switching law: scale*u_max below the setpoint, scale*u_min
/// above it, 0 exactly at it.
double BangBangStep(double measurement, double setpoint, double u_max, double u_min,
                    double scale = 1.0);

struct PidGains {
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;

  /// Throws InvalidInput for negative or non-finite gains.
  void Validate() const;
};

struct PidConfig {
  double integral_clamp = 10.0;  // |integral| bound, error * s
  std::size_t buffer_len = 1000; // FIFO window of (error, dt) samples
  double derivative_filter = 0.0;  // single-pole smoothing coefficient in [0, 1); 0 = off

  void Validate() const;
};

struct PidSample {
  double error = 0.0;
  double dt = 0.0;
};

/// Error history for one PID loop. Single owner.
struct PidState {
  std::deque<PidSample> buffer;
  double prev_error = 0.0;
  bool has_prev = false;
  double window_sum = 0.0;  // sum of error*dt over the buffer, unclamped
  double integral = 0.0;    // window_sum clamped to +/- integral_clamp
  double filtered_derivative = 0.0;
  std::size_t pushes_since_resum = 0;
};

/// Discrete PID: kp*e + ki*clamp(sum e_i*dt_i over the window) + kd*de/dt.
/// The first call has no derivative term. Throws InvalidInput for dt <= 0.
double PidStep(PidState& state, const PidGains& gains, const PidConfig& config, double error,
               double dt);

class PidController {
 public:
  PidController() = default;
  PidController(PidGains gains, PidConfig config) : gains_(gains), config_(config) {
    gains_.Validate();
    config_.Validate();
  }

  double Step(double error, double dt) { return PidStep(state_, gains_, config_, error, dt); }
  void Reset() { state_ = PidState{}; }
  void set_gains(const PidGains& gains) { gains_ = gains; }

  const PidGains& gains() const { return gains_; }
  const PidConfig& config() const { return config_; }
  const PidState& state() const { return state_; }

 private:
  PidGains gains_;
  PidConfig config_;
  PidState state_;
};

struct OutputShaper {
  double min = -std::numeric_limits<double>::infinity();
  double max = std::numeric_limits<double>::infinity();
  double max_rate = std::numeric_limits<double>::infinity();  // units per second
  double deadband = 0.0;  // half-width on the error

  void Validate() const;
};

/// Dead-band on the error, then clamp, then slew limit relative to prev.
double ShapeOutput(const OutputShaper& shaper, double raw, double prev, double error, double dt);

struct GainBreakpoint {
  double at = 0.0;
  PidGains gains;
};

/// Piecewise-constant gains keyed on a scheduling variable (e.g. speed).
struct GainSchedule {
  std::vector<GainBreakpoint> breakpoints;  // strictly increasing `at`

  void Validate() const;
};

/// Gains of the interval [at_i, at_{i+1}) containing value; clamps to the end
/// intervals. Throws InvalidInput for an empty schedule.
PidGains ScheduleGains(const GainSchedule& schedule, double value);

}  // namespace avtrack
