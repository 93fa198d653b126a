#pragma once

#include <cmath>
#include <numbers>

namespace avtrack {

inline constexpr double kPi = std::numbers::pi;

inline double DegToRad(double deg) { return deg * kPi / 180.0; }
inline double RadToDeg(double rad) { return rad * 180.0 / kPi; }

/// Wraps an angle into (-pi, pi].
double WrapAngle(double angle);

/// Planar pose and forward speed at the center of gravity.
struct VehicleState {
  double x = 0.0;      // m, east
  double y = 0.0;      // m, north
  double theta = 0.0;  // rad, (-pi, pi]
  double v = 0.0;      // m/s
};

/// Longitudinal acceleration and front steering angle. Positive steer turns
/// the vehicle counter-clockwise (left).
struct ControlInput {
  double accel = 0.0;  // m/s^2
  double steer = 0.0;  // rad
};

struct VehicleParams {
  double wheelbase = 2.5;          // L, m
  double dist_rear = 1.25;         // lr, CoG to rear axle, m
  double mass = 1500.0;            // kg
  double yaw_inertia = 2250.0;     // kg m^2
  double corner_stiff_front = 60000.0;  // N/rad
  double corner_stiff_rear = 60000.0;   // N/rad
  double aero_coeff = 0.4;         // lumped C_alpha, kg/m
  double rolling_coeff = 10.0;     // C_r1, N s/m
  double wheel_radius = 0.3;       // m
  double gravity = 9.81;           // m/s^2
  double road_grade = 0.0;         // rad
  double accel_max = 3.0;          // throttle limit, m/s^2
  double decel_max = 6.0;          // brake limit (positive magnitude), m/s^2
  double steer_max = 70.0 * std::numbers::pi / 180.0;  // rad

  double dist_front() const { return wheelbase - dist_rear; }

  /// Throws InvalidInput when a length, mass, inertia, stiffness or bound is
  /// non-positive, or lr is not strictly inside the wheelbase.
  void Validate() const;
};

struct StateDerivative {
  double dx = 0.0;
  double dy = 0.0;
  double dtheta = 0.0;
  double dv = 0.0;
};

/// Kinematic state extended with the lateral dynamic quantities.
struct DynamicState {
  VehicleState pose;
  double lateral_vel = 0.0;  // body-frame lateral velocity, m/s
  double yaw_rate = 0.0;     // rad/s
  double slip = 0.0;         // beta, rad, (-pi/2, pi/2)
};

struct LateralAccel {
  double lateral = 0.0;  // d(lateral_vel)/dt, m/s^2
  double yaw = 0.0;      // d(yaw_rate)/dt, rad/s^2
};

// Below this speed the lateral dynamic model is singular.
inline constexpr double kDynamicMinSpeed = 0.1;

/// Slip angle at the CoG, atan(lr/L * tan(steer)).
double SlipAngle(double steer, const VehicleParams& params);

/// Turning radius about the instantaneous center of rotation,
/// L / (tan(steer) cos(beta)). Infinite for zero steer.
double TurningRadius(double steer, const VehicleParams& params);

ControlInput ClampControl(const ControlInput& u, const VehicleParams& params);

/// Continuous-time kinematic bicycle model. Throws InvalidInput when u is
/// outside the actuation bounds.
StateDerivative KinematicDerivatives(const VehicleState& state, const ControlInput& u,
                                     const VehicleParams& params);

/// First-order state transition q + q_dot * dt.
VehicleState StepEuler(const VehicleState& state, const StateDerivative& deriv, double dt);

/// Second-order state transition q + q_dot * dt + q_ddot * dt^2 / 2. The dv
/// slot of second_deriv carries the jerk input.
VehicleState StepSecondOrder(const VehicleState& state, const StateDerivative& deriv,
                             const StateDerivative& second_deriv, double dt);

/// Net longitudinal acceleration from wheel traction minus aerodynamic drag,
/// rolling resistance and grade.
double LongitudinalAccel(const VehicleState& state, double wheel_ang_accel,
                         const VehicleParams& params);

/// Linear-tire lateral and yaw accelerations. Throws ModelSingularity when
/// v <= kDynamicMinSpeed.
LateralAccel LateralDynamics(const DynamicState& dyn, double steer, const VehicleParams& params);

/// One plant step of the dynamic bicycle model. The accel command is taken as
/// the traction term r_wheel * wheel angular acceleration; resistances are
/// subtracted. Falls back to the kinematic model below switch_speed. The step is
/// split into `substeps` equal explicit sub-steps.
DynamicState StepDynamic(const DynamicState& dyn, const ControlInput& u,
                         const VehicleParams& params, double dt, int substeps = 10,
                         double switch_speed = 1.0, double jerk = 0.0);

/// Kinematic plant step: derivatives then Euler transition.
VehicleState StepKinematic(const VehicleState& state, const ControlInput& u,
                           const VehicleParams& params, double dt);

bool IsFinite(const VehicleState& s);

}  // namespace avtrack
