#pragma once

#include <array>

#include <Eigen/Dense>

namespace eidc::vehicle {

// (-pi, pi]
double wrap_angle(double a);

struct EgoState {
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  double heading = 0.0;
  double yaw_rate = 0.0;
  double length = 4.8;
  double width = 2.0;

  // x, y, vx, vy, heading, yaw_rate
  Eigen::Matrix<double, 6, 1> as_vector() const;
};

struct Action {
  double steer = 0.0;
  double accel = 0.0;
};

struct ActionBounds {
  double steer_min = -0.4;
  double steer_max = 0.4;
  double accel_min = -3.0;
  double accel_max = 1.5;
};

struct BicycleParams {
  double mass = 1500.0;
  double yaw_inertia = 2500.0;
  double front_axle = 1.4;
  double rear_axle = 1.6;
  double front_stiffness = 88000.0;  // magnitudes, N/rad
  double rear_stiffness = 94000.0;

  // Throws ConfigError unless every value is positive and the wheelbase fits
  // inside `length`.
  void validate(double length) const;
};

// lo + (hi - lo) * (tanh(raw) + 1) / 2 per component.
Action squash_action(const std::array<double, 2>& raw, const ActionBounds& bounds = {});
// Diagonal of d(action)/d(raw).
std::array<double, 2> squash_derivative(const std::array<double, 2>& raw, const ActionBounds& bounds = {});

struct StepJacobian {
  Eigen::Matrix<double, 6, 6> state;   // rows/cols in as_vector() order
  Eigen::Matrix<double, 6, 2> action;  // columns steer, accel
};

// One step of the dynamic bicycle model with linear tires. Positions and
// heading advance explicitly; the lateral pair (vy, yaw_rate) is solved
// implicitly in the tire forces, which stays stable down to standstill.
// Throws NumericError on non-finite input.
EgoState step_bicycle(const EgoState& s, const Action& u, double dt, const BicycleParams& p = {},
                      StepJacobian* jacobian = nullptr);

}  // namespace eidc::vehicle
