#pragma once

#include <optional>
#include <vector>

namespace eyedrive::sim {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct Circle {
  Vec2 center;
  double radius = 0.0;
};

struct Segment {
  Vec2 a;
  Vec2 b;
};

/// Axis-aligned rectangle; its edges are walls.
struct Bounds {
  Vec2 min{-10.0, -10.0};
  Vec2 max{10.0, 10.0};
};

/// 2D obstacle world in meters.
struct World {
  Bounds bounds;
  std::vector<Circle> circles;
  std::vector<Segment> segments;

  /// Throws ConfigError for empty bounds, non-positive radii, degenerate
  /// segments, or a start point outside the bounds or inside an obstacle.
  void validate(Vec2 start) const;

  std::vector<Segment> walls() const;

  /// Distance from `p` to the nearest obstacle or wall; negative inside a circle.
  double clearance(Vec2 p) const;
  /// Smallest clearance over the straight path p0 -> p1.
  double clearance_along(Vec2 p0, Vec2 p1) const;

  /// First hit along the ray from `p` at `heading`, if within `max_range`.
  std::optional<double> ray_cast(Vec2 p, double heading, double max_range) const;
  /// Nearest obstacle point whose bearing from `p` is within
  /// [heading - half_angle, heading + half_angle], half_angle in [0, pi/2].
  std::optional<double> nearest_in_sector(Vec2 p, double heading, double half_angle,
                                          double max_range) const;
};

double point_segment_distance(Vec2 p, const Segment& s);
double segment_distance(const Segment& s, const Segment& t);

}  // namespace eyedrive::sim
