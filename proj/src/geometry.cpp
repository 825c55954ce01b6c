#include "speedfill/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace speedfill {

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

double polyline_length(std::span<const Point> polyline) {
  double total = 0.0;
  for (std::size_t i = 1; i < polyline.size(); ++i) total += distance(polyline[i - 1], polyline[i]);
  return total;
}

PolylineProjection project_onto_polyline(Point p, std::span<const Point> polyline) {
  PolylineProjection best;
  best.distance = std::numeric_limits<double>::infinity();
  if (polyline.empty()) return best;
  if (polyline.size() == 1) {
    best.distance = distance(p, polyline[0]);
    best.foot = polyline[0];
    return best;
  }
  double walked = 0.0;
  for (std::size_t i = 1; i < polyline.size(); ++i) {
    const Point a = polyline[i - 1];
    const Point b = polyline[i];
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    const double piece = std::sqrt(len2);
    double t = 0.0;
    if (len2 > 0.0) t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
    const Point foot{a.x + t * dx, a.y + t * dy};
    const double d = distance(p, foot);
    if (d < best.distance) {
      best.distance = d;
      best.offset = walked + t * piece;
      best.foot = foot;
    }
    walked += piece;
  }
  return best;
}

Point point_at_offset(std::span<const Point> polyline, double offset) {
  if (polyline.empty()) return {};
  if (offset <= 0.0 || polyline.size() == 1) return polyline.front();
  double walked = 0.0;
  for (std::size_t i = 1; i < polyline.size(); ++i) {
    const double piece = distance(polyline[i - 1], polyline[i]);
    if (walked + piece >= offset && piece > 0.0) {
      const double t = (offset - walked) / piece;
      const Point a = polyline[i - 1];
      const Point b = polyline[i];
      return {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
    }
    walked += piece;
  }
  return polyline.back();
}

}  // namespace speedfill
