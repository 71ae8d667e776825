#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "fieldcal/association.hpp"
#include "fieldcal/field_model.hpp"
#include "fieldcal/geometry.hpp"

namespace fieldcal {

struct SimulatorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// World frame: z = 0 is the playing surface, z points up. Cameras sit above
// the surface and look toward it; image x right, y down, z forward.
Pose look_at_pose(const Vec3& camera_center, const Vec3& target);

struct TrajectoryConfig {
  enum class Kind { statik, orbit, waypoints };

  Kind kind = Kind::orbit;
  int frames = 100;
  double fps = 30.0;
  double image_width = 1920.0;
  double image_height = 1080.0;

  // Orbit around the template center (also used by `statik`, which freezes
  // the first orbit pose).
  double orbit_radius_m = 26.0;
  double orbit_height_m = 9.0;
  double orbit_speed_deg_s = 2.0;
  double orbit_start_deg = 250.0;

  // Camera-center waypoints interpolated with a C1 Catmull-Rom spline;
  // look targets on the ground plane are interpolated the same way. A single
  // shared target may be given instead of one per waypoint.
  std::vector<Vec3> waypoints;
  std::vector<Vec2> look_targets;

  // Linear focal schedule over the frame index: f(i) = start + (end - start)
  // * i / frames.
  double focal_start_px = 1200.0;
  double focal_end_px = 1200.0;

  // Generation fails unless at least 4 template keypoints are in view in at
  // least this fraction of frames.
  double min_visible_fraction = 0.9;
};

struct PlayerSimConfig {
  int count = 0;
  double speed_mps = 3.0;       // typical speed of the bounded random walk
  double max_speed_mps = 8.0;   // hard cap
};

struct GroundTruthFrame {
  Intrinsics k;
  Pose m;
  PlayerPositions players;
};

// Deterministic ground-truth sequence: C1 camera trajectory, focal schedule,
// and players on a bounded random walk inside the boundary. Same seed, same
// sequence.
std::vector<GroundTruthFrame> generate_sequence(const FieldTemplate& tpl,
                                                const TrajectoryConfig& trajectory,
                                                const PlayerSimConfig& players,
                                                std::uint64_t seed);

struct NoiseModel {
  double sigma_px = 1.0;             // semantic keypoint jitter
  double sigma_player_px = 3.0;      // player foot-point jitter
  double dropout_prob = 0.0;         // per detection
  double outlier_prob = 0.0;         // semantic detections knocked off target
  double outlier_offset_px = 100.0;  // minimum offset magnitude of an outlier
  double id_swap_prob = 0.0;         // semantic id replaced by another one
  double player_false_positive_rate = 0.0;  // expected spurious players/frame
};

// Projects visible template keypoints and players into the image and applies
// the noise model. Detections are deterministic in (inputs, seed); use a
// per-frame sub-seed for sequences.
std::vector<Detection> render_detections(const Intrinsics& k, const Pose& pose,
                                         const FieldTemplate& tpl,
                                         std::span<const Vec2> players,
                                         const NoiseModel& noise, std::uint64_t seed);

// Splitmix-style derivation of per-frame seeds from a master seed.
std::uint64_t frame_seed(std::uint64_t master, std::uint64_t frame_index);

}  // namespace fieldcal
