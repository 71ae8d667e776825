#include "fieldcal/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace fieldcal {

namespace {

// Maps a polygon through a homography. Fails (nullopt) when the ring crosses
// the horizon: homogeneous w changes sign or vanishes across vertices, i.e.
// the image wraps through infinity and no longer bounds an area.
std::optional<Polygon> map_polygon(const Mat3& h, const Polygon& poly) {
  Polygon out;
  out.reserve(poly.size());
  std::vector<double> ws;
  ws.reserve(poly.size());
  double wmax = 0.0;
  for (const Vec2& p : poly) {
    const Vec3 q = h * Vec3(p.x(), p.y(), 1.0);
    ws.push_back(q.z());
    wmax = std::max(wmax, std::abs(q.z()));
  }
  if (wmax <= 0.0) return std::nullopt;
  bool pos = false, neg = false;
  for (const double w : ws) {
    if (w > 1e-12 * wmax) pos = true;
    else if (w < -1e-12 * wmax) neg = true;
    else return std::nullopt;  // vertex on the horizon
  }
  if (pos && neg) return std::nullopt;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec3 q = h * Vec3(poly[i].x(), poly[i].y(), 1.0);
    out.emplace_back(q.x() / q.z(), q.y() / q.z());
  }
  return out;
}

}  // namespace

IoUResult iou_full(const Homography& h_gt, const Homography& h_est,
                   const FieldTemplate& tpl) {
  const Mat3 warp = h_gt.inverse().matrix() * h_est.matrix();
  const auto mapped = map_polygon(warp, tpl.boundary);
  if (!mapped) return {0.0, true};

  const double inter = intersection_area(tpl.boundary, *mapped);
  const double uni = polygon_area(tpl.boundary) + polygon_area(*mapped) - inter;
  if (!(uni > 0.0)) return {0.0, true};
  return {std::clamp(inter / uni, 0.0, 1.0), false};
}

namespace {

// Sutherland-Hodgman step against a single half-plane a.(x,y,1) >= 0.
Polygon clip_halfplane(const Polygon& poly, const Vec3& a) {
  Polygon out;
  const auto side = [&](const Vec2& p) { return a.x() * p.x() + a.y() * p.y() + a.z(); };
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& cur = poly[i];
    const Vec2& nxt = poly[(i + 1) % poly.size()];
    const double sc = side(cur), sn = side(nxt);
    if (sc >= 0.0) out.push_back(cur);
    if ((sc >= 0.0) != (sn >= 0.0)) {
      const double t = sc / (sc - sn);
      out.push_back(cur + t * (nxt - cur));
    }
  }
  return out;
}

}  // namespace

IoUResult iou_visible(const Homography& h_gt, const Homography& h_est,
                      const FieldTemplate& tpl, double image_w, double image_h) {
  const Mat3 warp = h_gt.inverse().matrix() * h_est.matrix();
  const auto mapped = map_polygon(warp, tpl.boundary);
  if (!mapped) return {0.0, true};
  const Polygon& b = tpl.boundary;
  const Polygon& w = *mapped;

  const double inter_full = intersection_area(b, w);
  const double uni_full = polygon_area(b) + polygon_area(w) - inter_full;
  if (!(uni_full > 0.0)) return {0.0, true};

  // Visible ground region: the image rectangle kept to the ground side of the
  // horizon line and pulled back to the world plane (convex throughout).
  // Errors are forgiven outside it: the disagreement area is measured inside
  // this region only, while the union keeps its full extent. That can only
  // drop error mass, so the result is never below iou_full, and it collapses
  // to iou_full exactly when the whole field is in view.
  const Mat3 back = h_gt.inverse().matrix();
  const Vec3 horizon = back.row(2).transpose();
  const double w0 =
      h_gt.matrix().row(2).dot(Vec3(b.front().x(), b.front().y(), 1.0));
  if (w0 == 0.0) return {0.0, true};
  const double sign = w0 > 0.0 ? 1.0 : -1.0;

  Polygon rect = rectangle_polygon(0.0, 0.0, image_w, image_h);
  double wmax = 0.0;
  for (const Vec2& q : rect) {
    wmax = std::max(wmax, std::abs(horizon.dot(Vec3(q.x(), q.y(), 1.0))));
  }
  if (wmax == 0.0) return {0.0, true};
  rect = clip_halfplane(rect, sign * horizon - Vec3(0.0, 0.0, 1e-8 * wmax));
  if (rect.size() < 3) return {1.0, false};  // no ground in view at all

  const auto visible = map_polygon(back, rect);
  if (!visible) return {0.0, true};

  const Polygon vis_b = clip_convex(b, *visible);
  const Polygon vis_w = clip_convex(w, *visible);
  const double visible_disagreement = std::max(
      0.0, polygon_area(vis_b) + polygon_area(vis_w) -
               2.0 * intersection_area(vis_b, vis_w));
  return {std::clamp(1.0 - visible_disagreement / uni_full, 0.0, 1.0), false};
}

std::optional<double> reprojection_error_normalized(
    const Intrinsics& k_gt, const Pose& m_gt, const Intrinsics& k_est,
    const Pose& m_est, const FieldTemplate& tpl, double grid_step_m) {
  if (!(grid_step_m > 0.0)) throw GeometryError("grid step must be positive");

  double x0 = tpl.boundary[0].x(), x1 = x0, y0 = tpl.boundary[0].y(), y1 = y0;
  for (const Vec2& v : tpl.boundary) {
    x0 = std::min(x0, v.x());
    x1 = std::max(x1, v.x());
    y0 = std::min(y0, v.y());
    y1 = std::max(y1, v.y());
  }

  double acc = 0.0;
  int used = 0;
  for (double y = y0; y <= y1 + 1e-9; y += grid_step_m) {
    for (double x = x0; x <= x1 + 1e-9; x += grid_step_m) {
      const Vec2 p(x, y);
      if (!point_in_polygon(tpl.boundary, p)) continue;

      const Vec3 cam_gt = m_gt.rotation * Vec3(x, y, 0.0) + m_gt.translation;
      if (cam_gt.z() <= 1e-12) continue;
      const Vec2 px_gt(k_gt.f * cam_gt.x() / cam_gt.z() + k_gt.width / 2.0,
                       k_gt.f * cam_gt.y() / cam_gt.z() + k_gt.height / 2.0);
      if (px_gt.x() < 0.0 || px_gt.x() > k_gt.width || px_gt.y() < 0.0 ||
          px_gt.y() > k_gt.height) {
        continue;  // only ground-truth-visible grid points count
      }

      const Vec3 cam_est = m_est.rotation * Vec3(x, y, 0.0) + m_est.translation;
      if (std::abs(cam_est.z()) <= 1e-12) {
        acc += k_gt.height;  // estimate throws the point to infinity
        ++used;
        continue;
      }
      const Vec2 px_est(k_est.f * cam_est.x() / cam_est.z() + k_est.width / 2.0,
                        k_est.f * cam_est.y() / cam_est.z() + k_est.height / 2.0);
      acc += (px_gt - px_est).norm();
      ++used;
    }
  }
  if (used == 0) return std::nullopt;
  return acc / static_cast<double>(used) / k_gt.height;
}

double angular_error_deg(const Mat3& r_gt, const Mat3& r_est) {
  // atan2 over the Rodrigues sine and cosine terms stays accurate at both
  // ends of [0, pi]; acos((tr - 1) / 2) bottoms out near 1e-6 deg for small
  // angles.
  const Mat3 rel = r_gt.transpose() * r_est;
  const Vec3 skew(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
  const double s = 0.5 * skew.norm();
  const double c = 0.5 * (rel.trace() - 1.0);
  return std::atan2(s, c) * 180.0 / 3.14159265358979323846;
}

double translation_error_m(const Vec3& t_gt, const Vec3& t_est) {
  return (t_gt - t_est).norm();
}

double focal_error_rel(double f_gt, double f_est) {
  if (!(f_gt > 0.0)) throw GeometryError("ground-truth focal must be positive");
  return std::abs(f_gt - f_est) / f_gt;
}

double auc(std::span<const double> errors, double threshold) {
  if (!(threshold > 0.0)) throw GeometryError("auc threshold must be positive");
  if (errors.empty()) throw GeometryError("auc needs at least one error value");
  double acc = 0.0;
  for (const double e : errors) {
    const double clamped = std::clamp(e, 0.0, threshold);
    acc += (threshold - clamped) / threshold;
  }
  return acc / static_cast<double>(errors.size());
}

}  // namespace fieldcal
