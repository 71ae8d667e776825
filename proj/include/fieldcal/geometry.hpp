#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "fieldcal/types.hpp"

namespace fieldcal {

struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Point configuration cannot support the requested estimate (collinear,
// coincident, or too few points).
struct DegenerateConfiguration : GeometryError {
  using GeometryError::GeometryError;
};

// The homography carries no usable perspective information about the focal
// length (near fronto-parallel view).
struct FocalUnobservable : GeometryError {
  using GeometryError::GeometryError;
};

// The homography is inconsistent with the centered pinhole model (negative
// squared focal length).
struct FocalInconsistent : GeometryError {
  using GeometryError::GeometryError;
};

struct RansacFailure : GeometryError {
  using GeometryError::GeometryError;
};

// Ground-plane-to-image projective map. The matrix is kept at unit Frobenius
// norm with the sign fixed so the bottom-right entry is non-negative, and must
// have full rank (condition number below 1e12).
class Homography {
 public:
  Homography() : Homography(Mat3::Identity()) {}
  explicit Homography(const Mat3& m);

  const Mat3& matrix() const { return m_; }
  Homography inverse() const;

  // Maps a ground-plane point (meters) to pixels; nullopt for points that map
  // through infinity.
  std::optional<Vec2> try_map(const Vec2& p) const;
  Vec2 map(const Vec2& p) const;  // throws GeometryError instead

 private:
  Mat3 m_;
};

// Zero-skew pinhole with square pixels and the principal point at the image
// center.
struct Intrinsics {
  double f = 0.0;
  double width = 0.0;
  double height = 0.0;

  bool valid() const { return f > 0.0 && width > 0.0 && height > 0.0; }
  Vec2 principal_point() const { return {width / 2.0, height / 2.0}; }
  Mat3 matrix() const;
  Mat3 inverse_matrix() const;
};

// World-to-camera rigid transform: X_cam = R * X_world + t.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 camera_center() const { return -rotation.transpose() * translation; }
  bool valid_rotation(double tol = 1e-9) const;
};

enum class PointSource { semantic, player };

struct Correspondence {
  Vec2 world;  // ground-plane point, meters (z = 0)
  Vec2 image;  // pixels
  PointSource source = PointSource::semantic;
  KeypointId id = 0;  // meaningful for semantic points only
};

struct Projection {
  Vec2 px = Vec2::Zero();
  double depth = 0.0;
  bool in_front() const { return depth > 0.0; }
};

// Perspective projection of a world point; throws GeometryError when the point
// lies on the principal plane (zero depth).
Projection project(const Intrinsics& k, const Pose& pose, const Vec3& world);
Projection project_ground(const Intrinsics& k, const Pose& pose, const Vec2& world_xy);

// H proportional to K * [r1 r2 t].
Homography homography_from_pose(const Intrinsics& k, const Pose& pose);

// Direct linear transform with isotropic normalization of both point sets.
Homography estimate_homography_dlt(std::span<const Correspondence> corrs);

struct RansacConfig {
  double threshold_px = 3.0;
  int max_iters = 2000;
  double confidence = 0.995;
  std::uint64_t seed = 0;
  // Minimum number of semantic correspondences in every minimal sample; used
  // when player correspondences participate so they never form a hypothesis
  // on their own.
  int min_semantic_in_sample = 0;
};

struct RansacResult {
  Homography model;
  std::vector<bool> inliers;
  int inlier_count = 0;
};

RansacResult estimate_homography_ransac(std::span<const Correspondence> corrs,
                                        const RansacConfig& cfg);

// Forward transfer error plus the inverse transfer error converted to pixels
// through the local world-to-image scale of H, so both terms share units.
double symmetric_transfer_error_px(const Mat3& h, const Mat3& h_inv, const Correspondence& c);

// Recovers the focal length of a centered pinhole camera from a ground-plane
// homography (see docs/focal_recovery.md). Throws FocalUnobservable or
// FocalInconsistent.
double focal_from_homography(const Homography& h, double width, double height);

// Splits H into a rigid pose given the intrinsics. `world_pts` (typically the
// template keypoints) vote on the sign of the decomposition: the sign placing
// the majority in front of the camera wins.
Pose decompose_homography(const Homography& h, const Intrinsics& k,
                          std::span<const Vec2> world_pts);

struct RefineOptions {
  int max_iters = 60;
  double initial_lambda = 1e-3;
};

struct RefineResult {
  Pose pose;
  bool reduced_cost = false;  // false: no damping value decreased the cost
  double initial_cost = 0.0;
  double final_cost = 0.0;
};

// Levenberg-Marquardt minimization of squared reprojection error over a
// right-multiplied axis-angle increment and a translation delta. Never
// returns a pose with cost above the input pose.
RefineResult refine_pose(const Pose& pose, const Intrinsics& k,
                         std::span<const Correspondence> corrs,
                         const RefineOptions& opts = {});

int count_inliers(const Intrinsics& k, const Pose& pose,
                  std::span<const Correspondence> corrs, double radius_px);

namespace detail {

// Stacked residuals (observed - projected, 2 rows per correspondence) and the
// Jacobian of the projected coordinates with respect to the 6-vector
// [axis-angle increment, translation delta].
void reprojection_system(const Pose& pose, const Intrinsics& k,
                         std::span<const Correspondence> corrs,
                         Eigen::VectorXd& residuals, Eigen::MatrixXd& jacobian);

double reprojection_cost(const Pose& pose, const Intrinsics& k,
                         std::span<const Correspondence> corrs);

Pose apply_increment(const Pose& pose, const Eigen::Matrix<double, 6, 1>& delta);

}  // namespace detail

}  // namespace fieldcal
