#include "avtrack/vehicle_model.h"

#include <algorithm>
#include <string>

#include "avtrack/errors.h"

namespace avtrack {

double WrapAngle(double angle) {
  double a = std::remainder(angle, 2.0 * kPi);
  // remainder maps to [-pi, pi]; -pi belongs to the other end of the interval.
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

void VehicleParams::Validate() const {
  auto positive = [](double v, const char* name) {
    if (!std::isfinite(v) || v <= 0.0) {
      throw InvalidInput(std::string("vehicle parameter must be positive: ") + name);
    }
  };
  positive(wheelbase, "wheelbase");
  positive(dist_rear, "dist_rear");
  positive(mass, "mass");
  positive(yaw_inertia, "yaw_inertia");
  positive(corner_stiff_front, "corner_stiff_front");
  positive(corner_stiff_rear, "corner_stiff_rear");
  positive(wheel_radius, "wheel_radius");
  positive(gravity, "gravity");
  positive(accel_max, "accel_max");
  positive(decel_max, "decel_max");
  positive(steer_max, "steer_max");
  if (dist_rear >= wheelbase) throw InvalidInput("dist_rear must be less than wheelbase");
  if (steer_max >= kPi / 2.0) throw InvalidInput("steer_max must be below pi/2");
  if (!std::isfinite(aero_coeff) || aero_coeff < 0.0 || !std::isfinite(rolling_coeff) ||
      rolling_coeff < 0.0 || !std::isfinite(road_grade)) {
    throw InvalidInput("resistance coefficients must be finite and non-negative");
  }
}

double SlipAngle(double steer, const VehicleParams& params) {
  if (!std::isfinite(steer) || std::abs(steer) >= kPi / 2.0) {
    throw InvalidInput("steer must be finite with |steer| < pi/2");
  }
  return std::atan(params.dist_rear / params.wheelbase * std::tan(steer));
}

double TurningRadius(double steer, const VehicleParams& params) {
  const double beta = SlipAngle(steer, params);
  return params.wheelbase / (std::tan(steer) * std::cos(beta));
}

ControlInput ClampControl(const ControlInput& u, const VehicleParams& params) {
  return {std::clamp(u.accel, -params.decel_max, params.accel_max),
          std::clamp(u.steer, -params.steer_max, params.steer_max)};
}

namespace {

void CheckControl(const ControlInput& u, const VehicleParams& params) {
  constexpr double kSlack = 1e-12;
  if (!std::isfinite(u.accel) || !std::isfinite(u.steer)) {
    throw InvalidInput("control input must be finite");
  }
  if (u.accel > params.accel_max + kSlack || u.accel < -params.decel_max - kSlack) {
    throw InvalidInput("accel outside actuation bounds");
  }
  if (std::abs(u.steer) > params.steer_max + kSlack) {
    throw InvalidInput("steer outside actuation bounds");
  }
}

void CheckDt(double dt) {
  if (!std::isfinite(dt) || dt <= 0.0) throw InvalidInput("dt must be positive");
}

}  // namespace

StateDerivative KinematicDerivatives(const VehicleState& state, const ControlInput& u,
                                     const VehicleParams& params) {
  CheckControl(u, params);
  const double beta = SlipAngle(u.steer, params);
  StateDerivative d;
  d.dx = state.v * std::cos(state.theta + beta);
  d.dy = state.v * std::sin(state.theta + beta);
  d.dtheta = state.v * std::tan(u.steer) * std::cos(beta) / params.wheelbase;
  d.dv = u.accel;
  return d;
}

VehicleState StepEuler(const VehicleState& state, const StateDerivative& deriv, double dt) {
  CheckDt(dt);
  VehicleState next;
  next.x = state.x + deriv.dx * dt;
  next.y = state.y + deriv.dy * dt;
  next.theta = WrapAngle(state.theta + deriv.dtheta * dt);
  next.v = state.v + deriv.dv * dt;
  return next;
}

VehicleState StepSecondOrder(const VehicleState& state, const StateDerivative& deriv,
                             const StateDerivative& second_deriv, double dt) {
  CheckDt(dt);
  const double half_dt2 = dt * dt / 2.0;
  VehicleState next;
  next.x = state.x + deriv.dx * dt + second_deriv.dx * half_dt2;
  next.y = state.y + deriv.dy * dt + second_deriv.dy * half_dt2;
  next.theta = WrapAngle(state.theta + deriv.dtheta * dt + second_deriv.dtheta * half_dt2);
  next.v = state.v + deriv.dv * dt + second_deriv.dv * half_dt2;
  return next;
}

double LongitudinalAccel(const VehicleState& state, double wheel_ang_accel,
                         const VehicleParams& params) {
  if (!std::isfinite(wheel_ang_accel) || !std::isfinite(state.v)) {
    throw InvalidInput("longitudinal inputs must be finite");
  }
  const double v = state.v;
  const double traction = params.wheel_radius * wheel_ang_accel;
  const double aero = params.aero_coeff * v * v / params.mass;
  const double rolling = params.rolling_coeff * std::abs(v) / params.mass;
  const double grade = params.gravity * params.road_grade;
  return traction - aero - rolling - grade;
}

LateralAccel LateralDynamics(const DynamicState& dyn, double steer, const VehicleParams& params) {
  const double v = dyn.pose.v;
  if (!(v > kDynamicMinSpeed)) {
    throw ModelSingularity("lateral dynamic model is singular for v <= 0.1 m/s; "
                           "use the kinematic model");
  }
  const double m = params.mass;
  const double iz = params.yaw_inertia;
  const double cf = params.corner_stiff_front;
  const double cr = params.corner_stiff_rear;
  const double lf = params.dist_front();
  const double lr = params.dist_rear;
  const double beta = dyn.slip;
  const double r = dyn.yaw_rate;

  LateralAccel acc;
  acc.lateral = -(cf + cr) / m * beta + ((cr * lr - cf * lf) / (m * v) - v) * r + cf / m * steer;
  acc.yaw = (cr * lr - cf * lf) / iz * beta - (cr * lr * lr + cf * lf * lf) / (iz * v) * r +
            cf * lf / iz * steer;
  return acc;
}

VehicleState StepKinematic(const VehicleState& state, const ControlInput& u,
                           const VehicleParams& params, double dt) {
  return StepEuler(state, KinematicDerivatives(state, u, params), dt);
}

DynamicState StepDynamic(const DynamicState& dyn, const ControlInput& u,
                         const VehicleParams& params, double dt, int substeps,
                         double switch_speed, double jerk) {
  CheckDt(dt);
  CheckControl(u, params);
  if (substeps < 1) throw InvalidInput("substeps must be >= 1");
  const double h = dt / substeps;
  const double cutoff = std::max(switch_speed, kDynamicMinSpeed);

  DynamicState s = dyn;
  for (int i = 0; i < substeps; ++i) {
    const double v = s.pose.v;
    const double dv = LongitudinalAccel(s.pose, u.accel / params.wheel_radius, params);
    if (!(v > cutoff)) {
      // Low-speed fallback: kinematic transition, lateral states slaved to it.
      const double beta = SlipAngle(u.steer, params);
      StateDerivative d = KinematicDerivatives(s.pose, u, params);
      d.dv = dv;
      s.pose = StepEuler(s.pose, d, h);
      if (s.pose.v < 0.0 && v >= 0.0) s.pose.v = 0.0;  // resistance cannot reverse
      s.slip = beta;
      s.yaw_rate = d.dtheta;
      s.lateral_vel = s.pose.v * std::tan(beta);
      continue;
    }
    const LateralAccel lat = LateralDynamics(s, u.steer, params);
    const double heading = s.pose.theta + s.slip;
    StateDerivative d1{v * std::cos(heading), v * std::sin(heading), s.yaw_rate, dv};
    StateDerivative d2{dv * std::cos(heading) - v * s.yaw_rate * std::sin(heading),
                       dv * std::sin(heading) + v * s.yaw_rate * std::cos(heading), lat.yaw,
                       jerk};
    s.pose = StepSecondOrder(s.pose, d1, d2, h);
    s.yaw_rate += lat.yaw * h;
    s.lateral_vel += lat.lateral * h;
    const double v_next = std::max(s.pose.v, kDynamicMinSpeed);
    s.slip = std::atan(s.lateral_vel / v_next);
  }
  return s;
}

bool IsFinite(const VehicleState& s) {
  return std::isfinite(s.x) && std::isfinite(s.y) && std::isfinite(s.theta) &&
         std::isfinite(s.v);
}

}  // namespace avtrack
