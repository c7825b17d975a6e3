#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "../support/fd.hpp"
#include "common/error.hpp"
#include "vehicle/bicycle.hpp"

using namespace eidc;
using namespace eidc::vehicle;

namespace {

// Continuous linear-tire bicycle model, forward Euler with many substeps.
// Inputs are held constant over the interval.
EgoState fine_integrate(EgoState s, const Action& u, double dt, int substeps, const BicycleParams& p) {
  const double h = dt / substeps;
  for (int k = 0; k < substeps; ++k) {
    const double alpha_f = (s.vy + p.front_axle * s.yaw_rate) / s.vx - u.steer;
    const double alpha_r = (s.vy - p.rear_axle * s.yaw_rate) / s.vx;
    const double ff = -p.front_stiffness * alpha_f;
    const double fr = -p.rear_stiffness * alpha_r;
    const double dx = s.vx * std::cos(s.heading) - s.vy * std::sin(s.heading);
    const double dy = s.vx * std::sin(s.heading) + s.vy * std::cos(s.heading);
    const double dvy = (ff + fr) / p.mass - s.vx * s.yaw_rate;
    const double dr = (p.front_axle * ff - p.rear_axle * fr) / p.yaw_inertia;
    s.x += h * dx;
    s.y += h * dy;
    s.heading += h * s.yaw_rate;
    s.vx += h * u.accel;
    s.vy += h * dvy;
    s.yaw_rate += h * dr;
  }
  return s;
}

}  // namespace

TEST_CASE("squash maps to bounds") {
  const Action mid = squash_action({0.0, 0.0});
  CHECK(mid.steer == 0.0);
  CHECK(mid.accel == doctest::Approx(-0.75).epsilon(1e-15));
  const Action hi = squash_action({40.0, 40.0});
  CHECK(hi.steer == doctest::Approx(0.4));
  CHECK(hi.accel == doctest::Approx(1.5));
  const Action lo = squash_action({-40.0, -40.0});
  CHECK(lo.steer == doctest::Approx(-0.4));
  CHECK(lo.accel == doctest::Approx(-3.0));
  for (double r : {-3.0, -0.2, 0.9, 2.5}) {
    const Action a = squash_action({r, r});
    CHECK(a.steer > -0.4);
    CHECK(a.steer < 0.4);
    const auto d = squash_derivative({r, r});
    const Action up = squash_action({r + 1e-6, r + 1e-6});
    const Action dn = squash_action({r - 1e-6, r - 1e-6});
    CHECK(test::grad_rel_error(d[0], (up.steer - dn.steer) / 2e-6) < 1e-8);
    CHECK(test::grad_rel_error(d[1], (up.accel - dn.accel) / 2e-6) < 1e-8);
  }
}

TEST_CASE("standstill is an equilibrium") {
  EgoState s;
  s.x = 3.0;
  s.y = -7.0;
  s.heading = 1.2;
  const EgoState n = step_bicycle(s, {0.0, 0.0}, 0.1);
  CHECK(n.as_vector() == s.as_vector());
}

TEST_CASE("straight-line kinematics") {
  EgoState s;
  s.vx = 10.0;
  const EgoState n = step_bicycle(s, {0.0, 0.0}, 0.1);
  CHECK(n.x == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(n.y == 0.0);
  CHECK(n.vx == 10.0);
  CHECK(n.vy == 0.0);
  CHECK(n.heading == 0.0);
  CHECK(n.yaw_rate == 0.0);
  EgoState t = s;
  for (int k = 0; k < 50; ++k) t = step_bicycle(t, {0.0, 0.7}, 0.1);
  CHECK(t.vy == 0.0);
  CHECK(t.yaw_rate == 0.0);
  CHECK(t.y == 0.0);
}

TEST_CASE("one step tracks a fine integration of the continuous model") {
  const BicycleParams p;
  for (double vx : {5.0, 10.0, 15.0}) {
    EgoState s;
    s.vx = vx;
    s.heading = 0.3;
    const Action u{0.002, 0.0};
    const EgoState coarse = step_bicycle(s, u, 0.1, p);
    const EgoState fine = fine_integrate(s, u, 0.1, 1000, p);
    CHECK(std::hypot(coarse.x - fine.x, coarse.y - fine.y) < 1e-3);
  }
}

TEST_CASE("heading stays wrapped") {
  CHECK(wrap_angle(std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(wrap_angle(-std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(wrap_angle(3 * std::numbers::pi / 2) == doctest::Approx(-std::numbers::pi / 2));
  EgoState s;
  s.vx = 6.0;
  s.heading = 3.1;
  for (int k = 0; k < 300; ++k) {
    s = step_bicycle(s, {0.3, 0.0}, 0.1);
    CHECK(s.heading > -std::numbers::pi);
    CHECK(s.heading <= std::numbers::pi);
  }
}

TEST_CASE("non-finite input is rejected") {
  EgoState s;
  s.vx = NAN;
  CHECK_THROWS_AS(step_bicycle(s, {0.0, 0.0}, 0.1), NumericError);
  CHECK_THROWS_AS(step_bicycle(EgoState{}, {INFINITY, 0.0}, 0.1), NumericError);
}

TEST_CASE("stable at low speed under full steering") {
  EgoState s;
  s.vx = 0.5;
  for (int k = 0; k < 200; ++k) {
    s = step_bicycle(s, {0.4, 0.0}, 0.1);
    CHECK(std::abs(s.yaw_rate) < 1.0);
    CHECK(std::abs(s.vy) < 1.0);
  }
}

TEST_CASE("jacobians match finite differences across speeds") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double worst = 0.0;
  for (double vx : {0.05, 0.1, 0.4, 0.9, 1.5, 4.0, 9.0, 14.0}) {
    for (int trial = 0; trial < 10; ++trial) {
      EgoState s;
      s.x = 10 * u01(rng);
      s.y = -5 * u01(rng);
      s.vx = vx;
      s.vy = 0.4 * (u01(rng) - 0.5);
      s.heading = 6 * (u01(rng) - 0.5);
      s.yaw_rate = 0.6 * (u01(rng) - 0.5);
      const Action u{0.6 * (u01(rng) - 0.5), 2.0 * (u01(rng) - 0.5)};
      StepJacobian J;
      step_bicycle(s, u, 0.1, {}, &J);

      double in[8] = {s.x, s.y, s.vx, s.vy, s.heading, s.yaw_rate, u.steer, u.accel};
      auto eval = [&](int out) {
        EgoState t = s;
        t.x = in[0];
        t.y = in[1];
        t.vx = in[2];
        t.vy = in[3];
        t.heading = in[4];
        t.yaw_rate = in[5];
        const EgoState n = step_bicycle(t, {in[6], in[7]}, 0.1);
        const double v[6] = {n.x, n.y, n.vx, n.vy, n.heading, n.yaw_rate};
        return v[out];
      };
      for (int out = 0; out < 6; ++out) {
        for (int k = 0; k < 8; ++k) {
          const double num = test::central_diff(std::span<double>(in, 8), static_cast<std::size_t>(k),
                                                [&] { return eval(out); }, 1e-7);
          const double ana = k < 6 ? J.state(out, k) : J.action(out, k - 6);
          worst = std::max(worst, test::grad_rel_error(ana, num));
        }
      }
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("parameter validation") {
  BicycleParams p;
  CHECK_NOTHROW(p.validate(4.8));
  p.mass = 0;
  CHECK_THROWS_AS(p.validate(4.8), ConfigError);
  BicycleParams q;
  CHECK_THROWS_AS(q.validate(2.5), ConfigError);
}
