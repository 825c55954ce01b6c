#pragma once

#include <span>

namespace speedfill {

/// Planar position in meters (projected easting / northing).
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

[[nodiscard]] double distance(Point a, Point b);

/// Result of projecting a point onto a polyline.
struct PolylineProjection {
  double distance = 0.0;  ///< perpendicular distance, clamped to the end points
  double offset = 0.0;    ///< arc length from the first vertex to the foot point
  Point foot;
};

[[nodiscard]] double polyline_length(std::span<const Point> polyline);

/// Closest point on the polyline. Ties between pieces keep the earliest piece.
[[nodiscard]] PolylineProjection project_onto_polyline(Point p, std::span<const Point> polyline);

/// Point reached after walking `offset` meters along the polyline; clamped to its ends.
[[nodiscard]] Point point_at_offset(std::span<const Point> polyline, double offset);

struct BoundingBox {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;
};

}  // namespace speedfill
