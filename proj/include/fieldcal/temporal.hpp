#pragma once

#include <Eigen/Geometry>
#include <deque>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "fieldcal/association.hpp"
#include "fieldcal/field_model.hpp"
#include "fieldcal/geometry.hpp"

namespace fieldcal {

struct FilterError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Particle {
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
  Vec3 t = Vec3::Zero();
  double weight = 0.0;

  Pose pose() const { return {q.toRotationMatrix(), t}; }
};

struct FilterConfig {
  int particle_count = 300;
  // Observation kernels: exp(-xi^2 / (2 sigma^2)) per point family, blended
  // with weight alpha on the semantic term.
  double sigma_s_px = 2.0;
  double sigma_p_px = 2.0;
  double alpha = 0.5;
  // Diagonal perturbation noise: axis-angle std per axis and translation std
  // per axis.
  double sigma_rot_deg = 0.5;
  double sigma_trans_m = 0.05;
  // Moving-median window for the focal history; 0 keeps every past estimate
  // (for broadcasts with constant intrinsics).
  int intrinsics_window = 30;
  // Reprojection radius for the re-initialization inlier comparison.
  double reinit_radius_px = 5.0;
};

struct FilterState {
  FilterConfig cfg;
  std::vector<Particle> particles;
  std::mt19937_64 rng;
  std::deque<double> focal_history;
  std::optional<Intrinsics> smoothed;
  bool initialized = false;
};

FilterState make_filter_state(const FilterConfig& cfg, std::uint64_t seed);

// Systematic (low-variance) resampling. Returns true when the weights were
// unusable and a uniform resample was done instead.
bool resample(FilterState& state);

// Adds diagonal Gaussian noise: a right-multiplied axis-angle rotation and an
// additive translation. Quaternions stay unit-norm.
void perturb(FilterState& state);

struct WeightObservations {
  Intrinsics k;
  std::span<const Correspondence> semantic;  // matched this frame
  std::span<const Detection> player_detections;
  std::span<const Vec2> player_positions;
};

// Mean reprojection distance of the matched semantic keypoints (pixels);
// nullopt when there are none. Points behind the camera dominate the mean
// with a large constant so such particles lose their weight.
std::optional<double> mean_semantic_error_px(const Pose& pose, const WeightObservations& obs);

// Mean distance from each visible projected player position to the nearest
// player detection; nullopt when no player term is available.
std::optional<double> mean_player_error_px(const Pose& pose, const WeightObservations& obs);

double gaussian_score(double xi, double sigma);

// Blended observation weight. A missing term renormalizes the blend onto the
// remaining one; with neither term the result is nullopt.
std::optional<double> observation_weight(std::optional<double> xi_s,
                                         std::optional<double> xi_p,
                                         const FilterConfig& cfg);

// Fills normalized particle weights. Returns true when no observation was
// available (or all weights underflowed) and uniform weights were assigned.
bool compute_weights(FilterState& state, const WeightObservations& obs);

// Weighted mean pose: sign-aligned quaternion average plus weighted mean
// translation. `degenerate` (optional) reports a vanishing quaternion sum, in
// which case the highest-weight particle is returned.
Pose estimate_pose(const FilterState& state, bool* degenerate = nullptr);

// Moving median of the focal history with outliers beyond 3x the median
// absolute deviation rejected. `f_new` is ignored when absent (focal
// unobservable this frame). Throws FilterError when no estimate exists yet.
Intrinsics smooth_intrinsics(FilterState& state, std::optional<double> f_new,
                             double width, double height);

// Repopulates the particle set around `direct` when the direct pose explains
// strictly more inliers than the filtered pose. Returns true when
// re-initialization happened.
bool maybe_reinitialize(FilterState& state, const Pose& direct, const Pose& filtered,
                        const Intrinsics& k, std::span<const Correspondence> corrs);

void initialize_particles(FilterState& state, const Pose& pose);

// ---------------------------------------------------------------------------
// Per-frame pipeline.

struct PipelineConfig {
  RansacConfig ransac;
  FilterConfig filter;
  double image_width = 1920.0;
  double image_height = 1080.0;
  double player_gate_m = 2.0;
  double player_margin_m = 5.0;
  bool use_filter = true;
  bool use_players = true;
  std::uint64_t seed = 1;
};

enum class FrameStatus { registered, coasting, unregistered };

struct FrameEstimate {
  FrameStatus status = FrameStatus::unregistered;
  Intrinsics intrinsics;
  Pose pose;                   // filter output after refinement (or the
                               // refined direct pose without the filter)
  std::optional<Pose> direct;  // decomposition of the per-frame homography
  int inliers_direct = 0;
  int inliers_filtered = 0;
  int correspondences = 0;
  bool reinitialized = false;
  bool focal_fallback = false;   // focal unobservable; smoothed history used
  bool refine_diverged = false;
  bool weights_uniform = false;
  double elapsed_ms = 0.0;
};

struct FrameInput {
  std::vector<Detection> detections;
  PlayerPositions player_positions;
};

// Stateful frame-by-frame registration: homography estimation, player-based
// refinement, focal recovery and smoothing, decomposition, particle filtering,
// pose refinement, and re-initialization.
class Registrar {
 public:
  Registrar(FieldTemplate tpl, PipelineConfig cfg);

  FrameEstimate step(const FrameInput& frame);

  const FieldTemplate& field_template() const { return tpl_; }
  const PipelineConfig& config() const { return cfg_; }
  const FilterState& filter_state() const { return state_; }

 private:
  FieldTemplate tpl_;
  PipelineConfig cfg_;
  FilterState state_;
  std::vector<Vec2> template_points_;
  std::uint64_t frame_index_ = 0;
};

}  // namespace fieldcal
