#include "eyedrive/sim/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "eyedrive/errors.hpp"

namespace eyedrive::sim {

namespace {

Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
Vec2 operator*(double k, Vec2 a) { return {k * a.x, k * a.y}; }
double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
double norm(Vec2 a) { return std::hypot(a.x, a.y); }
Vec2 unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

std::optional<double> ray_circle(Vec2 p, Vec2 u, const Circle& c) {
  const Vec2 d = p - c.center;
  const double b = dot(d, u);
  const double cc = dot(d, d) - c.radius * c.radius;
  if (cc <= 0.0) return 0.0;
  const double disc = b * b - cc;
  if (disc < 0.0) return std::nullopt;
  const double t = -b - std::sqrt(disc);
  if (t < 0.0) return std::nullopt;
  return t;
}

std::optional<double> ray_segment(Vec2 p, Vec2 u, const Segment& s) {
  const Vec2 e = s.b - s.a;
  const Vec2 w = s.a - p;
  const double denom = cross(u, e);
  if (std::abs(denom) < 1e-15) {
    if (std::abs(cross(w, u)) > 1e-12) return std::nullopt;
    const double t0 = dot(w, u);
    const double t1 = dot(s.b - p, u);
    if ((t0 <= 0.0) != (t1 <= 0.0)) return 0.0;
    const double t = std::min(t0, t1);
    if (t < 0.0) return std::nullopt;
    return t;
  }
  const double t = cross(w, e) / denom;
  const double sp = cross(w, u) / denom;
  if (t < 0.0 || sp < 0.0 || sp > 1.0) return std::nullopt;
  return t;
}

bool segments_intersect(const Segment& s, const Segment& t) {
  const Vec2 r = s.b - s.a;
  const Vec2 q = t.b - t.a;
  const double denom = cross(r, q);
  const Vec2 w = t.a - s.a;
  if (std::abs(denom) < 1e-15) return false;  // parallel: endpoint distances cover contact
  const double u = cross(w, q) / denom;
  const double v = cross(w, r) / denom;
  return u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0;
}

// Nearest point of segment `s` to `p` restricted to the wedge where
// dot(n, x - p) >= 0 for both normals.
std::optional<double> segment_in_wedge(Vec2 p, const Segment& s, Vec2 n1, Vec2 n2) {
  const Vec2 a = s.a - p;
  const Vec2 e = s.b - s.a;
  double lo = 0.0;
  double hi = 1.0;
  for (const Vec2 n : {n1, n2}) {
    const double f0 = dot(n, a);
    const double f1 = dot(n, e);
    if (f1 == 0.0) {
      if (f0 < 0.0) return std::nullopt;
    } else if (f1 > 0.0) {
      lo = std::max(lo, -f0 / f1);
    } else {
      hi = std::min(hi, -f0 / f1);
    }
  }
  if (lo > hi) return std::nullopt;
  const double ee = dot(e, e);
  const double s_star = std::clamp(ee > 0.0 ? -dot(a, e) / ee : 0.0, lo, hi);
  return norm(a + s_star * e);
}

void keep_min(std::optional<double>& best, std::optional<double> d) {
  if (d && (!best || *d < *best)) best = d;
}

}  // namespace

double point_segment_distance(Vec2 p, const Segment& s) {
  const Vec2 e = s.b - s.a;
  const double ee = dot(e, e);
  const double t = ee > 0.0 ? std::clamp(dot(p - s.a, e) / ee, 0.0, 1.0) : 0.0;
  return norm(p - (s.a + t * e));
}

double segment_distance(const Segment& s, const Segment& t) {
  if (segments_intersect(s, t)) return 0.0;
  return std::min({point_segment_distance(s.a, t), point_segment_distance(s.b, t),
                   point_segment_distance(t.a, s), point_segment_distance(t.b, s)});
}

void World::validate(Vec2 start) const {
  if (!(bounds.max.x > bounds.min.x && bounds.max.y > bounds.min.y)) {
    throw ConfigError("world bounds are empty");
  }
  for (const Circle& c : circles) {
    if (!(c.radius > 0.0)) throw ConfigError("circle obstacle radius must be positive");
  }
  for (const Segment& s : segments) {
    if (s.a == s.b) throw ConfigError("segment obstacle has zero length");
  }
  if (start.x <= bounds.min.x || start.x >= bounds.max.x || start.y <= bounds.min.y ||
      start.y >= bounds.max.y) {
    throw ConfigError("start pose is outside the world bounds");
  }
  if (clearance(start) <= 0.0) throw ConfigError("start pose is inside an obstacle");
}

std::vector<Segment> World::walls() const {
  const Vec2 a = bounds.min;
  const Vec2 c = bounds.max;
  const Vec2 b{c.x, a.y};
  const Vec2 d{a.x, c.y};
  return {{a, b}, {b, c}, {c, d}, {d, a}};
}

double World::clearance(Vec2 p) const {
  double best = std::numeric_limits<double>::infinity();
  for (const Circle& c : circles) best = std::min(best, norm(p - c.center) - c.radius);
  for (const Segment& s : segments) best = std::min(best, point_segment_distance(p, s));
  for (const Segment& s : walls()) best = std::min(best, point_segment_distance(p, s));
  return best;
}

double World::clearance_along(Vec2 p0, Vec2 p1) const {
  const Segment path{p0, p1};
  double best = std::numeric_limits<double>::infinity();
  for (const Circle& c : circles) best = std::min(best, point_segment_distance(c.center, path) - c.radius);
  for (const Segment& s : segments) best = std::min(best, segment_distance(path, s));
  for (const Segment& s : walls()) best = std::min(best, segment_distance(path, s));
  return best;
}

std::optional<double> World::ray_cast(Vec2 p, double heading, double max_range) const {
  const Vec2 u = unit(heading);
  std::optional<double> best;
  for (const Circle& c : circles) keep_min(best, ray_circle(p, u, c));
  for (const Segment& s : segments) keep_min(best, ray_segment(p, u, s));
  for (const Segment& s : walls()) keep_min(best, ray_segment(p, u, s));
  if (best && *best > max_range) return std::nullopt;
  return best;
}

std::optional<double> World::nearest_in_sector(Vec2 p, double heading, double half_angle,
                                               double max_range) const {
  if (half_angle <= 0.0) return ray_cast(p, heading, max_range);
  // Inward normals of the two wedge edges; for half_angle = pi/2 both are the heading.
  const Vec2 n1{std::sin(heading + half_angle), -std::cos(heading + half_angle)};
  const Vec2 n2{-std::sin(heading - half_angle), std::cos(heading - half_angle)};
  const Vec2 left = unit(heading + half_angle);
  const Vec2 right = unit(heading - half_angle);

  std::optional<double> best;
  for (const Circle& c : circles) {
    const Vec2 d = c.center - p;
    const double dist = norm(d);
    if (dist <= c.radius) {
      keep_min(best, 0.0);
    } else if (dot(n1, d) >= 0.0 && dot(n2, d) >= 0.0) {
      keep_min(best, dist - c.radius);
    } else {
      keep_min(best, ray_circle(p, left, c));
      keep_min(best, ray_circle(p, right, c));
    }
  }
  for (const Segment& s : segments) keep_min(best, segment_in_wedge(p, s, n1, n2));
  for (const Segment& s : walls()) keep_min(best, segment_in_wedge(p, s, n1, n2));
  if (best && *best > max_range) return std::nullopt;
  return best;
}

}  // namespace eyedrive::sim
