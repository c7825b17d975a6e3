#include "world/geometry.hpp"

#include <algorithm>

namespace eidc::world {
namespace {

double projected_radius(const OrientedBox& b, Vec2 axis) {
  const Vec2 u = unit(b.heading);
  const Vec2 v{-u.y, u.x};
  return 0.5 * b.length * std::abs(u.dot(axis)) + 0.5 * b.width * std::abs(v.dot(axis));
}

}  // namespace

bool boxes_overlap(const OrientedBox& a, const OrientedBox& b) {
  const Vec2 d = b.center - a.center;
  const double reach = 0.5 * (std::hypot(a.length, a.width) + std::hypot(b.length, b.width));
  if (d.norm() > reach) return false;
  for (const OrientedBox* box : {&a, &b}) {
    const Vec2 u = unit(box->heading);
    for (Vec2 axis : {u, Vec2{-u.y, u.x}}) {
      if (std::abs(d.dot(axis)) > projected_radius(a, axis) + projected_radius(b, axis)) return false;
    }
  }
  return true;
}

bool segment_hits_box(Vec2 p, Vec2 q, const OrientedBox& box) {
  // Liang-Barsky clip in the box frame.
  const Vec2 a = rotate(p - box.center, -box.heading);
  const Vec2 b = rotate(q - box.center, -box.heading);
  const Vec2 d = b - a;
  const double hx = 0.5 * box.length, hy = 0.5 * box.width;
  double t0 = 0.0, t1 = 1.0;
  const double pv[4] = {-d.x, d.x, -d.y, d.y};
  const double qv[4] = {a.x + hx, hx - a.x, a.y + hy, hy - a.y};
  for (int i = 0; i < 4; ++i) {
    if (pv[i] == 0.0) {
      if (qv[i] < 0.0) return false;
      continue;
    }
    const double t = qv[i] / pv[i];
    if (pv[i] < 0.0) {
      t0 = std::max(t0, t);
    } else {
      t1 = std::min(t1, t);
    }
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace eidc::world
