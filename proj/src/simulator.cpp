#include "fieldcal/simulator.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <random>

#include "fieldcal/polygon.hpp"

namespace fieldcal {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Catmull-Rom interpolation over control points, end segments clamped by
// duplicating the terminal points. C1 everywhere, passes through each point.
template <typename V>
V catmull_rom(const std::vector<V>& pts, double t01) {
  const std::size_t n = pts.size();
  if (n == 1) return pts[0];
  const double s = std::clamp(t01, 0.0, 1.0) * static_cast<double>(n - 1);
  const std::size_t seg = std::min(static_cast<std::size_t>(s), n - 2);
  const double u = s - static_cast<double>(seg);

  const V p1 = pts[seg];
  const V p2 = pts[seg + 1];
  const V p0 = seg > 0 ? pts[seg - 1] : p1;
  const V p3 = seg + 2 < n ? pts[seg + 2] : p2;

  const double u2 = u * u;
  const double u3 = u2 * u;
  return 0.5 * ((2.0 * p1) + (p2 - p0) * u + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * u2 +
                (3.0 * p1 - p0 - 3.0 * p2 + p3) * u3);
}

}  // namespace

Pose look_at_pose(const Vec3& camera_center, const Vec3& target) {
  Vec3 forward = target - camera_center;
  const double dist = forward.norm();
  if (dist < 1e-9) throw SimulatorError("camera center coincides with its target");
  forward /= dist;

  Vec3 up(0.0, 0.0, 1.0);
  if (std::abs(forward.dot(up)) > 1.0 - 1e-9) {
    up = Vec3(0.0, 1.0, 0.0);  // looking straight down: fall back to world y
  }
  const Vec3 right = forward.cross(up).normalized();
  const Vec3 down = forward.cross(right);  // completes the right-handed triple

  Pose pose;
  pose.rotation.row(0) = right.transpose();
  pose.rotation.row(1) = down.transpose();
  pose.rotation.row(2) = forward.transpose();
  pose.translation = -pose.rotation * camera_center;
  return pose;
}

std::uint64_t frame_seed(std::uint64_t master, std::uint64_t frame_index) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (frame_index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<GroundTruthFrame> generate_sequence(const FieldTemplate& tpl,
                                                const TrajectoryConfig& trajectory,
                                                const PlayerSimConfig& players,
                                                std::uint64_t seed) {
  if (trajectory.frames <= 0) throw SimulatorError("frame count must be positive");
  if (trajectory.fps <= 0.0) throw SimulatorError("frame rate must be positive");
  if (trajectory.focal_start_px <= 0.0 || trajectory.focal_end_px <= 0.0) {
    throw SimulatorError("focal schedule must be positive");
  }
  if (trajectory.kind == TrajectoryConfig::Kind::waypoints && trajectory.waypoints.empty()) {
    throw SimulatorError("waypoint trajectory needs at least one waypoint");
  }
  if (!trajectory.look_targets.empty() && trajectory.look_targets.size() != 1 &&
      trajectory.look_targets.size() != trajectory.waypoints.size()) {
    throw SimulatorError("look targets must match waypoints (or be a single target)");
  }

  const Vec2 center = tpl.center;
  const int frames = trajectory.frames;

  std::vector<GroundTruthFrame> out(frames);

  // Camera path.
  for (int i = 0; i < frames; ++i) {
    const double t01 = frames > 1 ? static_cast<double>(i) / (frames - 1) : 0.0;
    Vec3 cam;
    Vec3 target(center.x(), center.y(), 0.0);
    switch (trajectory.kind) {
      case TrajectoryConfig::Kind::statik:
      case TrajectoryConfig::Kind::orbit: {
        const double t_s = (trajectory.kind == TrajectoryConfig::Kind::statik)
                               ? 0.0
                               : static_cast<double>(i) / trajectory.fps;
        const double ang =
            (trajectory.orbit_start_deg + trajectory.orbit_speed_deg_s * t_s) * kPi / 180.0;
        cam = Vec3(center.x() + trajectory.orbit_radius_m * std::cos(ang),
                   center.y() + trajectory.orbit_radius_m * std::sin(ang),
                   trajectory.orbit_height_m);
        break;
      }
      case TrajectoryConfig::Kind::waypoints: {
        cam = catmull_rom(trajectory.waypoints, t01);
        if (trajectory.look_targets.size() == 1) {
          target = Vec3(trajectory.look_targets[0].x(), trajectory.look_targets[0].y(), 0.0);
        } else if (!trajectory.look_targets.empty()) {
          const Vec2 lt = catmull_rom(trajectory.look_targets, t01);
          target = Vec3(lt.x(), lt.y(), 0.0);
        }
        break;
      }
    }
    out[i].m = look_at_pose(cam, target);
    const double f = trajectory.focal_start_px +
                     (trajectory.focal_end_px - trajectory.focal_start_px) *
                         static_cast<double>(i) / static_cast<double>(frames);
    out[i].k = Intrinsics{f, trajectory.image_width, trajectory.image_height};
  }

  // Visibility validation: at least 4 keypoints in view in at least the
  // configured fraction of frames.
  const std::vector<Vec2> kp = tpl.keypoint_positions();
  int good_frames = 0;
  for (const GroundTruthFrame& gt : out) {
    int visible = 0;
    for (const Vec2& p : kp) {
      const Vec3 cam = gt.m.rotation * Vec3(p.x(), p.y(), 0.0) + gt.m.translation;
      if (cam.z() <= 1e-9) continue;
      const double u = gt.k.f * cam.x() / cam.z() + gt.k.width / 2.0;
      const double v = gt.k.f * cam.y() / cam.z() + gt.k.height / 2.0;
      if (u >= 0.0 && u <= gt.k.width && v >= 0.0 && v <= gt.k.height) ++visible;
    }
    if (visible >= 4) ++good_frames;
  }
  if (static_cast<double>(good_frames) <
      trajectory.min_visible_fraction * static_cast<double>(frames) - 1e-9) {
    throw SimulatorError("trajectory keeps fewer than 4 keypoints in view too often");
  }

  // Players: bounded random walk inside the boundary, capped speed.
  if (players.count > 0) {
    std::mt19937_64 rng(frame_seed(seed, 0xb1a7e5ULL));
    std::normal_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    double bx0 = tpl.boundary[0].x(), bx1 = bx0, by0 = tpl.boundary[0].y(), by1 = by0;
    for (const Vec2& v : tpl.boundary) {
      bx0 = std::min(bx0, v.x());
      bx1 = std::max(bx1, v.x());
      by0 = std::min(by0, v.y());
      by1 = std::max(by1, v.y());
    }

    std::vector<Vec2> pos(players.count);
    std::vector<Vec2> vel(players.count);
    for (int p = 0; p < players.count; ++p) {
      // Rejection-sample a start position inside the boundary.
      for (int tries = 0; tries < 4096; ++tries) {
        const Vec2 cand(bx0 + uni(rng) * (bx1 - bx0), by0 + uni(rng) * (by1 - by0));
        if (point_in_polygon(tpl.boundary, cand)) {
          pos[p] = cand;
          break;
        }
        if (tries == 4095) throw SimulatorError("could not place players inside boundary");
      }
      const double heading = uni(rng) * 2.0 * kPi;
      vel[p] = players.speed_mps * Vec2(std::cos(heading), std::sin(heading));
    }

    const double dt = 1.0 / trajectory.fps;
    for (int i = 0; i < frames; ++i) {
      for (int p = 0; p < players.count; ++p) {
        if (i > 0) {
          // Velocity random walk with a soft pull toward the typical speed.
          vel[p] += Vec2(unit(rng), unit(rng)) * players.speed_mps * 0.5 * dt * 10.0;
          const double sp = vel[p].norm();
          if (sp > players.max_speed_mps) vel[p] *= players.max_speed_mps / sp;
          Vec2 next = pos[p] + vel[p] * dt;
          if (!point_in_polygon(tpl.boundary, next)) {
            vel[p] = -vel[p];  // bounce back into the field
            next = pos[p] + vel[p] * dt;
            if (!point_in_polygon(tpl.boundary, next)) next = pos[p];
          }
          pos[p] = next;
        }
        out[i].players.push_back(pos[p]);
      }
    }
  }

  return out;
}

std::vector<Detection> render_detections(const Intrinsics& k, const Pose& pose,
                                         const FieldTemplate& tpl,
                                         std::span<const Vec2> players,
                                         const NoiseModel& noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  std::vector<Detection> out;
  const std::size_t j = tpl.keypoint_count();

  for (const auto& [id, world] : tpl.keypoints) {
    const Vec3 cam = pose.rotation * Vec3(world.x(), world.y(), 0.0) + pose.translation;
    if (cam.z() <= 1e-9) continue;
    Vec2 px(k.f * cam.x() / cam.z() + k.width / 2.0,
            k.f * cam.y() / cam.z() + k.height / 2.0);
    if (px.x() < 0.0 || px.x() > k.width || px.y() < 0.0 || px.y() > k.height) continue;

    if (noise.dropout_prob > 0.0 && uni(rng) < noise.dropout_prob) continue;

    if (noise.sigma_px > 0.0) {
      px += Vec2(unit(rng), unit(rng)) * noise.sigma_px;
    }

    KeypointId emit_id = id;
    if (noise.id_swap_prob > 0.0 && uni(rng) < noise.id_swap_prob && j > 1) {
      // Swap to a uniformly random *other* template id.
      const auto offset = static_cast<std::size_t>(uni(rng) * static_cast<double>(j - 1));
      std::size_t idx = 0;
      for (const auto& [other_id, unused] : tpl.keypoints) {
        if (other_id == id) continue;
        if (idx == std::min(offset, j - 2)) {
          emit_id = other_id;
          break;
        }
        ++idx;
      }
    }

    if (noise.outlier_prob > 0.0 && uni(rng) < noise.outlier_prob) {
      const double ang = uni(rng) * 2.0 * kPi;
      const double mag = noise.outlier_offset_px * (1.0 + uni(rng));
      px += mag * Vec2(std::cos(ang), std::sin(ang));
    }

    Detection d;
    d.kind = Detection::Kind::semantic;
    d.id = emit_id;
    d.image = px;
    d.confidence = 1.0;
    out.push_back(d);
  }

  for (const Vec2& pw : players) {
    const Vec3 cam = pose.rotation * Vec3(pw.x(), pw.y(), 0.0) + pose.translation;
    if (cam.z() <= 1e-9) continue;
    Vec2 px(k.f * cam.x() / cam.z() + k.width / 2.0,
            k.f * cam.y() / cam.z() + k.height / 2.0);
    if (px.x() < 0.0 || px.x() > k.width || px.y() < 0.0 || px.y() > k.height) continue;

    if (noise.dropout_prob > 0.0 && uni(rng) < noise.dropout_prob) continue;
    if (noise.sigma_player_px > 0.0) {
      px += Vec2(unit(rng), unit(rng)) * noise.sigma_player_px;
    }

    Detection d;
    d.kind = Detection::Kind::player;
    d.id = 0;
    d.image = px;
    d.confidence = 1.0;
    out.push_back(d);
  }

  if (noise.player_false_positive_rate > 0.0) {
    std::poisson_distribution<int> spurious(noise.player_false_positive_rate);
    const int extra = spurious(rng);
    for (int i = 0; i < extra; ++i) {
      Detection d;
      d.kind = Detection::Kind::player;
      d.id = 0;
      d.image = Vec2(uni(rng) * k.width, uni(rng) * k.height);
      d.confidence = 0.5;
      out.push_back(d);
    }
  }

  return out;
}

}  // namespace fieldcal
