#include "fieldcal/polygon.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fieldcal {

namespace {

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (b.x() - o.x()) * (a.y() - o.y());
}

// Intersection of the infinite lines through (a,b) and (c,d). Callers must
// ensure the lines are not parallel.
Vec2 line_intersection(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const double s1 = cross(a, b, c);
  const double s2 = cross(a, b, d);
  return (c * s2 - d * s1) / (s2 - s1);
}

// Keeps the part of `poly` on the left of the directed line a -> b.
Polygon clip_halfplane(const Polygon& poly, const Vec2& a, const Vec2& b, double eps) {
  Polygon out;
  const std::size_t n = poly.size();
  if (n == 0) return out;
  out.reserve(n + 2);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& s = poly[i];
    const Vec2& e = poly[(i + 1) % n];
    const double ds = cross(a, b, s);
    const double de = cross(a, b, e);
    if (de >= -eps) {
      if (ds < -eps) out.push_back(line_intersection(a, b, s, e));
      out.push_back(e);
    } else if (ds >= eps) {
      out.push_back(line_intersection(a, b, s, e));
    }
  }
  return out;
}

// Area of the intersection of two counter-clockwise triangles.
double ccw_triangle_intersection_area(const Polygon& t1, const Polygon& t2, double eps) {
  Polygon cur = t1;
  for (int i = 0; i < 3 && !cur.empty(); ++i) {
    cur = clip_halfplane(cur, t2[i], t2[(i + 1) % 3], eps);
  }
  return polygon_area(cur);
}

bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p, double eps) {
  if (std::abs(cross(a, b, p)) > eps) return false;
  return p.x() >= std::min(a.x(), b.x()) - eps && p.x() <= std::max(a.x(), b.x()) + eps &&
         p.y() >= std::min(a.y(), b.y()) - eps && p.y() <= std::max(a.y(), b.y()) + eps;
}

bool segments_touch(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d, double eps) {
  const double d1 = cross(c, d, a);
  const double d2 = cross(c, d, b);
  const double d3 = cross(a, b, c);
  const double d4 = cross(a, b, d);
  if (((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps)) &&
      ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps))) {
    return true;
  }
  return on_segment(c, d, a, eps) || on_segment(c, d, b, eps) ||
         on_segment(a, b, c, eps) || on_segment(a, b, d, eps);
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 <= 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

}  // namespace

double polygon_area_signed(const Polygon& poly) {
  const std::size_t n = poly.size();
  if (n < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    acc += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * acc;
}

double polygon_area(const Polygon& poly) { return std::abs(polygon_area_signed(poly)); }

bool polygon_is_simple(const Polygon& poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;

  double scale = 0.0;
  for (const Vec2& v : poly) scale = std::max({scale, std::abs(v.x()), std::abs(v.y())});
  const double eps = 1e-12 * std::max(scale, 1.0);

  for (std::size_t i = 0; i < n; ++i) {
    if ((poly[i] - poly[(i + 1) % n]).norm() <= eps) return false;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      // Skip adjacent edges (they share an endpoint by construction).
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      if (segments_touch(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n], eps)) {
        return false;
      }
    }
  }
  return true;
}

bool point_in_polygon(const Polygon& poly, const Vec2& p, double eps) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if (point_segment_distance(p, a, b) <= eps) return true;
    const bool crosses = (a.y() > p.y()) != (b.y() > p.y());
    if (crosses) {
      const double x = a.x() + (p.y() - a.y()) / (b.y() - a.y()) * (b.x() - a.x());
      if (x > p.x()) inside = !inside;
    }
  }
  return inside;
}

double point_to_outline_distance(const Polygon& poly, const Vec2& p) {
  const std::size_t n = poly.size();
  if (n == 0) return std::numeric_limits<double>::infinity();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    best = std::min(best, point_segment_distance(p, poly[i], poly[(i + 1) % n]));
  }
  return best;
}

bool point_in_dilated_polygon(const Polygon& poly, const Vec2& p, double margin) {
  if (point_in_polygon(poly, p)) return true;
  return point_to_outline_distance(poly, p) <= margin;
}

Polygon clip_convex(const Polygon& subject, const Polygon& convex_clip) {
  if (subject.size() < 3 || convex_clip.size() < 3) return {};

  Polygon clip = convex_clip;
  if (polygon_area_signed(clip) < 0.0) std::reverse(clip.begin(), clip.end());

  double scale = 0.0;
  for (const Vec2& v : subject) scale = std::max({scale, std::abs(v.x()), std::abs(v.y())});
  for (const Vec2& v : clip) scale = std::max({scale, std::abs(v.x()), std::abs(v.y())});
  const double eps = 1e-12 * std::max(scale, 1.0) * std::max(scale, 1.0);

  Polygon cur = subject;
  const std::size_t n = clip.size();
  for (std::size_t i = 0; i < n && !cur.empty(); ++i) {
    cur = clip_halfplane(cur, clip[i], clip[(i + 1) % n], eps);
  }
  return cur;
}

// Decomposes both polygons into fans of triangles around the origin and sums
// the pairwise triangle intersection areas with orientation signs. The signed
// contributions cancel outside the true intersection, which makes the method
// valid for concave rings as well.
double intersection_area(const Polygon& p, const Polygon& q) {
  if (p.size() < 3 || q.size() < 3) return 0.0;

  Vec2 shift = Vec2::Zero();
  double scale = 0.0;
  for (const Vec2& v : p) shift += v;
  for (const Vec2& v : q) shift += v;
  shift /= static_cast<double>(p.size() + q.size());
  for (const Vec2& v : p) scale = std::max(scale, (v - shift).cwiseAbs().maxCoeff());
  for (const Vec2& v : q) scale = std::max(scale, (v - shift).cwiseAbs().maxCoeff());
  if (scale <= 0.0) return 0.0;

  Polygon pn(p.size()), qn(q.size());
  for (std::size_t i = 0; i < p.size(); ++i) pn[i] = (p[i] - shift) / scale;
  for (std::size_t i = 0; i < q.size(); ++i) qn[i] = (q[i] - shift) / scale;

  const double eps = 1e-14;
  const Vec2 origin = Vec2::Zero();
  double acc = 0.0;
  for (std::size_t i = 0; i < pn.size(); ++i) {
    Polygon t1 = {origin, pn[i], pn[(i + 1) % pn.size()]};
    const double a1 = polygon_area_signed(t1);
    if (std::abs(a1) <= eps) continue;
    if (a1 < 0.0) std::swap(t1[1], t1[2]);
    for (std::size_t j = 0; j < qn.size(); ++j) {
      Polygon t2 = {origin, qn[j], qn[(j + 1) % qn.size()]};
      const double a2 = polygon_area_signed(t2);
      if (std::abs(a2) <= eps) continue;
      if (a2 < 0.0) std::swap(t2[1], t2[2]);
      const double inter = ccw_triangle_intersection_area(t1, t2, eps);
      acc += (a1 < 0.0 ? -1.0 : 1.0) * (a2 < 0.0 ? -1.0 : 1.0) * inter;
    }
  }
  return std::abs(acc) * scale * scale;
}

Polygon rectangle_polygon(double x0, double y0, double x1, double y1) {
  return {Vec2(x0, y0), Vec2(x1, y0), Vec2(x1, y1), Vec2(x0, y1)};
}

}  // namespace fieldcal
