#include "vehicle/bicycle.hpp"

#include <cmath>
#include <numbers>

#include "common/error.hpp"

namespace eidc::vehicle {

double wrap_angle(double a) {
  if (a > -std::numbers::pi && a <= std::numbers::pi) return a;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(a + std::numbers::pi, two_pi);
  if (w < 0) w += two_pi;
  w -= std::numbers::pi;
  if (w <= -std::numbers::pi) w += two_pi;
  return w;
}

Eigen::Matrix<double, 6, 1> EgoState::as_vector() const {
  Eigen::Matrix<double, 6, 1> v;
  v << x, y, vx, vy, heading, yaw_rate;
  return v;
}

void BicycleParams::validate(double length) const {
  if (!(mass > 0 && yaw_inertia > 0 && front_axle > 0 && rear_axle > 0 && front_stiffness > 0 && rear_stiffness > 0)) {
    throw ConfigError("vehicle parameters must all be positive");
  }
  if (front_axle + rear_axle > length) throw ConfigError("axle distances exceed the vehicle length");
}

Action squash_action(const std::array<double, 2>& raw, const ActionBounds& b) {
  return {b.steer_min + (b.steer_max - b.steer_min) * 0.5 * (std::tanh(raw[0]) + 1.0),
          b.accel_min + (b.accel_max - b.accel_min) * 0.5 * (std::tanh(raw[1]) + 1.0)};
}

std::array<double, 2> squash_derivative(const std::array<double, 2>& raw, const ActionBounds& b) {
  const double t0 = std::tanh(raw[0]);
  const double t1 = std::tanh(raw[1]);
  return {0.5 * (b.steer_max - b.steer_min) * (1.0 - t0 * t0), 0.5 * (b.accel_max - b.accel_min) * (1.0 - t1 * t1)};
}

EgoState step_bicycle(const EgoState& s, const Action& u, double dt, const BicycleParams& p, StepJacobian* jac) {
  if (!(dt > 0)) throw UsageError("step_bicycle needs dt > 0");
  if (!s.as_vector().allFinite() || !std::isfinite(u.steer) || !std::isfinite(u.accel)) {
    throw NumericError("step_bicycle rejected a non-finite state or action");
  }
  const double kf = -p.front_stiffness;
  const double kr = -p.rear_stiffness;
  const double a = p.front_axle;
  const double b = p.rear_axle;
  const double m = p.mass;
  const double iz = p.yaw_inertia;
  const double vx = std::max(0.0, s.vx);
  const double vy = s.vy;
  const double r = s.yaw_rate;
  const double d = u.steer;
  const double c = std::cos(s.heading);
  const double sn = std::sin(s.heading);
  const double k1 = a * kf - b * kr;
  const double k2 = a * a * kf + b * b * kr;

  const double dv = m * vx - dt * (kf + kr);
  const double nv = m * vx * vy + dt * k1 * r - dt * kf * d * vx - dt * m * vx * vx * r;
  const double dr = iz * vx - dt * k2;
  const double nr = iz * vx * r + dt * k1 * vy - dt * a * kf * d * vx;

  EgoState n = s;
  n.x = s.x + dt * (vx * c - vy * sn);
  n.y = s.y + dt * (vx * sn + vy * c);
  const double vx_next = vx + dt * u.accel;
  const bool clamped = vx_next < 0.0;
  n.vx = clamped ? 0.0 : vx_next;
  n.vy = nv / dv;
  n.heading = wrap_angle(s.heading + dt * r);
  n.yaw_rate = nr / dr;

  if (jac != nullptr) {
    auto& J = jac->state;
    auto& G = jac->action;
    J.setZero();
    G.setZero();
    const double dvx_in = s.vx >= 0.0 ? 1.0 : 0.0;
    J(0, 0) = 1.0;
    J(0, 2) = dt * c * dvx_in;
    J(0, 3) = -dt * sn;
    J(0, 4) = dt * (-vx * sn - vy * c);
    J(1, 1) = 1.0;
    J(1, 2) = dt * sn * dvx_in;
    J(1, 3) = dt * c;
    J(1, 4) = dt * (vx * c - vy * sn);
    if (!clamped) {
      J(2, 2) = dvx_in;
      G(2, 1) = dt;
    }
    J(3, 2) = ((m * vy - dt * kf * d - 2.0 * dt * m * vx * r) * dv - nv * m) / (dv * dv) * dvx_in;
    J(3, 3) = m * vx / dv;
    J(3, 5) = (dt * k1 - dt * m * vx * vx) / dv;
    G(3, 0) = -dt * kf * vx / dv;
    J(4, 4) = 1.0;
    J(4, 5) = dt;
    J(5, 2) = ((iz * r - dt * a * kf * d) * dr - nr * iz) / (dr * dr) * dvx_in;
    J(5, 3) = dt * k1 / dr;
    J(5, 5) = iz * vx / dr;
    G(5, 0) = -dt * a * kf * vx / dr;
  }
  return n;
}

}  // namespace eidc::vehicle
