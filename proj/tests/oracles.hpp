#pragma once

// Independent brute-force reference implementations used to cross-check the
// library. Everything here recomputes results from first principles with its
// own arithmetic; none of it calls the code under test.

#include <optional>
#include <random>

#include "fieldcal/field_model.hpp"
#include "fieldcal/geometry.hpp"
#include "fieldcal/polygon.hpp"

namespace fieldcal::oracle {

struct RasterIoU {
  double intersection = 0.0;
  double union_area = 0.0;
  double iou = 0.0;
};

// Scanline rasterization over the joint bounding box: `rows` horizontal
// strips, even-odd inside intervals sampled at each strip midline.
RasterIoU raster_iou(const Polygon& a, const Polygon& b, int rows);

// Even-odd point-in-polygon without tolerance handling.
bool inside_even_odd(const Polygon& poly, const Vec2& p);

// Reprojection metric recomputed with 3x4 projection matrices instead of the
// library's rotation-then-intrinsics path. Mirrors the grid walk (bounding
// box, row-major, step) and the ground-truth visibility rule.
std::optional<double> reproj_grid(const Intrinsics& k_gt, const Pose& m_gt,
                                  const Intrinsics& k_est, const Pose& m_est,
                                  const FieldTemplate& tpl, double step_m);

struct Rig {
  Intrinsics k;
  Pose m;
};

// Random rig aimed at `target` on the ground plane: focal in [500, 5000] px,
// tilt from vertical in [10, 78] degrees, distance in [15, 60] m.
Rig random_rig(std::mt19937_64& rng, const Vec2& target);

}  // namespace fieldcal::oracle
