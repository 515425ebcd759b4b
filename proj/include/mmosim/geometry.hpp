#pragma once

#include <cmath>

namespace mmosim {

struct Point {
  double x{0.0};
  double y{0.0};

  friend bool operator==(const Point&, const Point&) = default;
};

inline double distance_sq(Point a, Point b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

inline double distance(Point a, Point b) { return std::sqrt(distance_sq(a, b)); }

struct Rect {
  double x0{0.0};
  double y0{0.0};
  double x1{0.0};
  double y1{0.0};

  Point center() const { return {(x0 + x1) * 0.5, (y0 + y1) * 0.5}; }
};

struct Disk {
  Point center;
  double radius{0.0};

  bool contains(Point p) const { return distance_sq(center, p) <= radius * radius; }
};

// True when the open disk and the closed rectangle share a point.
inline bool intersects(const Disk& d, const Rect& r) {
  const double dx = std::fmax(0.0, std::fmax(r.x0 - d.center.x, d.center.x - r.x1));
  const double dy = std::fmax(0.0, std::fmax(r.y0 - d.center.y, d.center.y - r.y1));
  return dx * dx + dy * dy < d.radius * d.radius;
}

inline bool intersects(const Disk& a, const Disk& b) {
  const double r = a.radius + b.radius;
  return distance_sq(a.center, b.center) < r * r;
}

}  // namespace mmosim
