#pragma once

#include <cmath>

namespace eidc::world {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double k) const { return {x * k, y * k}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
};

inline Vec2 unit(double heading) { return {std::cos(heading), std::sin(heading)}; }

// Counter-clockwise rotation.
inline Vec2 rotate(Vec2 p, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * p.x - s * p.y, s * p.x + c * p.y};
}

struct OrientedBox {
  Vec2 center;
  double heading = 0.0;
  double length = 0.0;
  double width = 0.0;
};

// Separating-axis test on the four face normals.
bool boxes_overlap(const OrientedBox& a, const OrientedBox& b);

// True when the closed segment [p, q] meets the box.
bool segment_hits_box(Vec2 p, Vec2 q, const OrientedBox& box);

}  // namespace eidc::world
