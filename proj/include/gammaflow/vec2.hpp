#pragma once

#include <cmath>

namespace gammaflow {

struct Vec2 {
  double x = 0.0, y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2& operator+=(Vec2 o) { x += o.x, y += o.y; return *this; }
  Vec2& operator-=(Vec2 o) { x -= o.x, y -= o.y; return *this; }
  bool operator==(const Vec2&) const = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline Vec2 perp(Vec2 a) { return {-a.y, a.x}; }
inline Vec2 normalized(Vec2 a) {
  const double n = norm(a);
  return {a.x / n, a.y / n};
}
inline Vec2 unit_at(double theta) { return {std::cos(theta), std::sin(theta)}; }
// Signed angle from a to b in (-pi, pi].
inline double angle_between(Vec2 a, Vec2 b) { return std::atan2(cross(a, b), dot(a, b)); }

}  // namespace gammaflow
