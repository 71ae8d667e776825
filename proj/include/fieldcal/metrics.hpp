#pragma once

#include <optional>
#include <span>

#include "fieldcal/field_model.hpp"
#include "fieldcal/geometry.hpp"
#include "fieldcal/polygon.hpp"

namespace fieldcal {

// Error-curve truncation thresholds used for the aggregate AUC numbers.
inline constexpr double kIoUErrorThreshold = 1.0;          // error = 1 - IoU
inline constexpr double kReprojErrorThreshold = 0.1;       // image heights
inline constexpr double kAngularErrorThresholdDeg = 10.0;  // degrees
inline constexpr double kTranslationErrorThresholdM = 2.5; // meters
inline constexpr double kFocalErrorThreshold = 0.1;        // relative

struct IoUResult {
  double value = 0.0;
  // The boundary wrapped through infinity under one of the maps; the value is
  // pinned to 0 so broken estimates penalize aggregates.
  bool wrapped = false;
};

// Intersection-over-union between the template boundary and its image under
// (H_gt^-1 o H_est), evaluated in the world plane. Symmetric in the two
// homographies up to second-order perspective effects.
IoUResult iou_full(const Homography& h_gt, const Homography& h_est,
                   const FieldTemplate& tpl);

// As iou_full, but errors the camera cannot see are forgiven: the two regions
// are clipped to the image-visible part of the ground plane and only the
// disagreement area that survives the clip counts against the score, while
// the union keeps its full extent. Never below iou_full, and equal to it when
// the whole field is in view. This is the flawed variant: a wrong estimate
// whose visible part coincides with the truth scores a perfect 1.0. Not
// symmetric (the ground truth defines visibility). With no visible ground at
// all the result is vacuously 1.0.
IoUResult iou_visible(const Homography& h_gt, const Homography& h_est,
                      const FieldTemplate& tpl, double image_w, double image_h);

// Mean pixel distance between ground-truth and estimated projections of a
// regular grid over the playing surface, normalized by image height. Grid
// points are kept when visible under the ground truth. nullopt when no grid
// point is visible.
std::optional<double> reprojection_error_normalized(
    const Intrinsics& k_gt, const Pose& m_gt, const Intrinsics& k_est,
    const Pose& m_est, const FieldTemplate& tpl, double grid_step_m = 1.0);

// Geodesic rotation distance in degrees.
double angular_error_deg(const Mat3& r_gt, const Mat3& r_est);

double translation_error_m(const Vec3& t_gt, const Vec3& t_est);

// |f_gt - f_est| / f_gt.
double focal_error_rel(double f_gt, double f_est);

// Normalized area under the cumulative error curve truncated at `threshold`:
// 1 when every error is 0, 0 when every error exceeds the threshold, 0.5 for
// errors uniform on [0, threshold]. Nonincreasing in every error value.
double auc(std::span<const double> errors, double threshold);

}  // namespace fieldcal
