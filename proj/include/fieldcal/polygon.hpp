#pragma once

#include <vector>

#include "fieldcal/types.hpp"

namespace fieldcal {

// Vertex list, implicitly closed. Orientation may be either winding unless a
// function states otherwise.
using Polygon = std::vector<Vec2>;

// Signed shoelace area (positive for counter-clockwise rings).
double polygon_area_signed(const Polygon& poly);
double polygon_area(const Polygon& poly);

// True when the ring has no repeated vertices and no two non-adjacent edges
// touch or cross.
bool polygon_is_simple(const Polygon& poly);

// Even-odd containment test; points within `eps` of an edge count as inside.
bool point_in_polygon(const Polygon& poly, const Vec2& p, double eps = 1e-9);

// Distance from a point to the polygon outline (0 for points on it).
double point_to_outline_distance(const Polygon& poly, const Vec2& p);

// True when p lies inside the polygon or within `margin` of its outline.
bool point_in_dilated_polygon(const Polygon& poly, const Vec2& p, double margin);

// Clips `subject` (any simple polygon) against a convex polygon.
Polygon clip_convex(const Polygon& subject, const Polygon& convex_clip);

// Area of the intersection of two simple polygons of arbitrary orientation.
double intersection_area(const Polygon& p, const Polygon& q);

Polygon rectangle_polygon(double x0, double y0, double x1, double y1);

}  // namespace fieldcal
