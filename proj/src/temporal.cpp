#include "fieldcal/temporal.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

namespace fieldcal {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kBehindPenaltyPx = 1e9;

// Splitmix64 step; used to derive independent per-frame seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Eigen::Quaterniond quat_exp(const Vec3& w) {
  const double angle = w.norm();
  if (angle == 0.0) return Eigen::Quaterniond::Identity();
  return Eigen::Quaterniond(Eigen::AngleAxisd(angle, w / angle));
}

}  // namespace

FilterState make_filter_state(const FilterConfig& cfg, std::uint64_t seed) {
  FilterState state;
  state.cfg = cfg;
  state.rng.seed(seed);
  return state;
}

void initialize_particles(FilterState& state, const Pose& pose) {
  const int n = std::max(state.cfg.particle_count, 1);
  state.particles.assign(n, Particle{});
  const Eigen::Quaterniond q(pose.rotation);
  for (Particle& p : state.particles) {
    p.q = q;
    p.t = pose.translation;
    p.weight = 1.0 / n;
  }
  state.initialized = true;
  perturb(state);
}

bool resample(FilterState& state) {
  const std::size_t n = state.particles.size();
  if (n == 0) throw FilterError("resample on empty particle set");

  double total = 0.0;
  for (const Particle& p : state.particles) total += p.weight;

  bool degenerate = !(total > 0.0) || !std::isfinite(total);
  std::vector<double> cumulative(n);
  if (!degenerate) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += state.particles[i].weight / total;
      cumulative[i] = acc;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      cumulative[i] = static_cast<double>(i + 1) / static_cast<double>(n);
    }
  }
  cumulative[n - 1] = 1.0;

  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double u0 = uni(state.rng);

  std::vector<Particle> next(n);
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (static_cast<double>(i) + u0) / static_cast<double>(n);
    while (j < n - 1 && cumulative[j] < u) ++j;
    next[i] = state.particles[j];
    next[i].weight = 1.0 / static_cast<double>(n);
  }
  state.particles = std::move(next);
  return degenerate;
}

void perturb(FilterState& state) {
  const double sr = state.cfg.sigma_rot_deg * kPi / 180.0;
  const double st = state.cfg.sigma_trans_m;
  std::normal_distribution<double> unit(0.0, 1.0);
  for (Particle& p : state.particles) {
    const Vec3 w(unit(state.rng) * sr, unit(state.rng) * sr, unit(state.rng) * sr);
    const Vec3 dt(unit(state.rng) * st, unit(state.rng) * st, unit(state.rng) * st);
    if (sr == 0.0 && st == 0.0) continue;
    p.q = (p.q * quat_exp(w)).normalized();
    p.t += dt;
  }
}

std::optional<double> mean_semantic_error_px(const Pose& pose, const WeightObservations& obs) {
  if (obs.semantic.empty()) return std::nullopt;
  double acc = 0.0;
  for (const Correspondence& c : obs.semantic) {
    const Vec3 cam = pose.rotation * Vec3(c.world.x(), c.world.y(), 0.0) + pose.translation;
    if (cam.z() < 1e-12) {
      acc += kBehindPenaltyPx;
      continue;
    }
    const Vec2 proj(obs.k.f * cam.x() / cam.z() + obs.k.width / 2.0,
                    obs.k.f * cam.y() / cam.z() + obs.k.height / 2.0);
    acc += (proj - c.image).norm();
  }
  return acc / static_cast<double>(obs.semantic.size());
}

std::optional<double> mean_player_error_px(const Pose& pose, const WeightObservations& obs) {
  if (obs.player_positions.empty() || obs.player_detections.empty()) return std::nullopt;

  double acc = 0.0;
  int used = 0;
  for (const Vec2& pw : obs.player_positions) {
    const Vec3 cam = pose.rotation * Vec3(pw.x(), pw.y(), 0.0) + pose.translation;
    if (cam.z() < 1e-12) continue;
    const Vec2 proj(obs.k.f * cam.x() / cam.z() + obs.k.width / 2.0,
                    obs.k.f * cam.y() / cam.z() + obs.k.height / 2.0);
    if (proj.x() < 0.0 || proj.x() > obs.k.width || proj.y() < 0.0 ||
        proj.y() > obs.k.height) {
      continue;  // this particle does not expect the player on screen
    }
    double best = std::numeric_limits<double>::infinity();
    for (const Detection& d : obs.player_detections) {
      if (d.kind != Detection::Kind::player) continue;
      best = std::min(best, (d.image - proj).norm());
    }
    if (!std::isfinite(best)) continue;
    acc += best;
    ++used;
  }
  if (used == 0) return std::nullopt;
  return acc / static_cast<double>(used);
}

double gaussian_score(double xi, double sigma) {
  if (sigma <= 0.0) throw FilterError("observation sigma must be positive");
  const double z = xi / sigma;
  return std::exp(-0.5 * z * z);
}

std::optional<double> observation_weight(std::optional<double> xi_s,
                                         std::optional<double> xi_p,
                                         const FilterConfig& cfg) {
  if (xi_s && xi_p) {
    return cfg.alpha * gaussian_score(*xi_s, cfg.sigma_s_px) +
           (1.0 - cfg.alpha) * gaussian_score(*xi_p, cfg.sigma_p_px);
  }
  if (xi_s) return gaussian_score(*xi_s, cfg.sigma_s_px);
  if (xi_p) return gaussian_score(*xi_p, cfg.sigma_p_px);
  return std::nullopt;
}

bool compute_weights(FilterState& state, const WeightObservations& obs) {
  if (state.particles.empty()) throw FilterError("compute_weights on empty particle set");

  bool any_observation = false;
  double total = 0.0;
  for (Particle& p : state.particles) {
    const Pose pose = p.pose();
    const auto xi_s = mean_semantic_error_px(pose, obs);
    const auto xi_p = mean_player_error_px(pose, obs);
    const auto w = observation_weight(xi_s, xi_p, state.cfg);
    if (w) {
      any_observation = true;
      p.weight = *w;
    } else {
      p.weight = 0.0;
    }
    total += p.weight;
  }

  if (!any_observation || !(total > 0.0) || !std::isfinite(total)) {
    const double u = 1.0 / static_cast<double>(state.particles.size());
    for (Particle& p : state.particles) p.weight = u;
    return true;
  }
  for (Particle& p : state.particles) p.weight /= total;
  return false;
}

Pose estimate_pose(const FilterState& state, bool* degenerate) {
  if (state.particles.empty()) throw FilterError("estimate_pose on empty particle set");
  if (degenerate) *degenerate = false;

  std::size_t ref = 0;
  for (std::size_t i = 1; i < state.particles.size(); ++i) {
    if (state.particles[i].weight > state.particles[ref].weight) ref = i;
  }
  const Eigen::Quaterniond qref = state.particles[ref].q;

  Eigen::Vector4d qsum = Eigen::Vector4d::Zero();
  Vec3 tsum = Vec3::Zero();
  for (const Particle& p : state.particles) {
    const double sign = p.q.coeffs().dot(qref.coeffs()) < 0.0 ? -1.0 : 1.0;
    qsum += p.weight * sign * p.q.coeffs();
    tsum += p.weight * p.t;
  }

  Pose out;
  out.translation = tsum;
  if (qsum.norm() < 1e-6) {
    if (degenerate) *degenerate = true;
    out.rotation = state.particles[ref].q.toRotationMatrix();
    out.translation = state.particles[ref].t;
    return out;
  }
  Eigen::Quaterniond qm;
  qm.coeffs() = qsum / qsum.norm();
  out.rotation = qm.toRotationMatrix();
  return out;
}

Intrinsics smooth_intrinsics(FilterState& state, std::optional<double> f_new,
                             double width, double height) {
  if (f_new && std::isfinite(*f_new) && *f_new > 0.0) {
    state.focal_history.push_back(*f_new);
    if (state.cfg.intrinsics_window > 0) {
      while (state.focal_history.size() >
             static_cast<std::size_t>(state.cfg.intrinsics_window)) {
        state.focal_history.pop_front();
      }
    }
  }
  if (state.focal_history.empty()) {
    throw FilterError("no focal estimate available yet");
  }

  const std::vector<double> window(state.focal_history.begin(), state.focal_history.end());
  const double med = median_of(window);
  std::vector<double> deviations(window.size());
  for (std::size_t i = 0; i < window.size(); ++i) deviations[i] = std::abs(window[i] - med);
  const double mad = median_of(deviations);

  std::vector<double> kept;
  kept.reserve(window.size());
  for (const double f : window) {
    if (std::abs(f - med) <= 3.0 * mad) kept.push_back(f);
  }
  const double smoothed = kept.empty() ? med : median_of(kept);

  Intrinsics out{smoothed, width, height};
  state.smoothed = out;
  return out;
}

bool maybe_reinitialize(FilterState& state, const Pose& direct, const Pose& filtered,
                        const Intrinsics& k, std::span<const Correspondence> corrs) {
  const int direct_inliers = count_inliers(k, direct, corrs, state.cfg.reinit_radius_px);
  const int filtered_inliers = count_inliers(k, filtered, corrs, state.cfg.reinit_radius_px);
  if (direct_inliers <= filtered_inliers) return false;
  initialize_particles(state, direct);
  return true;
}

// ---------------------------------------------------------------------------

Registrar::Registrar(FieldTemplate tpl, PipelineConfig cfg)
    : tpl_(std::move(tpl)), cfg_(cfg), state_(make_filter_state(cfg.filter, cfg.seed)) {
  validate_template(tpl_);
  template_points_ = tpl_.keypoint_positions();
}

FrameEstimate Registrar::step(const FrameInput& frame) {
  const auto t_start = std::chrono::steady_clock::now();
  const std::uint64_t frame_idx = frame_index_++;

  FrameEstimate est;

  if (!player_positions_valid(tpl_, frame.player_positions, cfg_.player_margin_m)) {
    throw FilterError("player positions violate the dilated field boundary");
  }

  // 1. Identity-based semantic matching.
  const std::vector<Correspondence> semantic = match_semantic(frame.detections, tpl_);

  std::vector<Detection> player_dets;
  for (const Detection& d : frame.detections) {
    if (d.kind == Detection::Kind::player) player_dets.push_back(d);
  }

  // 2. Per-frame homography (RANSAC over semantic points).
  std::optional<RansacResult> base;
  if (semantic.size() >= 4) {
    RansacConfig rcfg = cfg_.ransac;
    rcfg.seed = mix_seed(cfg_.seed, frame_idx * 2);
    try {
      base = estimate_homography_ransac(semantic, rcfg);
    } catch (const GeometryError&) {
      base.reset();
    }
  }

  // 3. Player-aided refinement of the homography.
  std::vector<Correspondence> all_corrs = semantic;
  std::vector<Correspondence> player_corrs;
  std::optional<RansacResult> refined = base;
  if (base && cfg_.use_players && !player_dets.empty() &&
      !frame.player_positions.empty()) {
    player_corrs = associate_players(base->model, player_dets,
                                     frame.player_positions, cfg_.player_gate_m);
    if (!player_corrs.empty() && semantic.size() >= 2) {
      RansacConfig rcfg = cfg_.ransac;
      rcfg.seed = mix_seed(cfg_.seed, frame_idx * 2 + 1);
      try {
        refined = refine_homography_with_players(semantic, player_corrs, rcfg);
        all_corrs.insert(all_corrs.end(), player_corrs.begin(), player_corrs.end());
      } catch (const GeometryError&) {
        refined = base;
        all_corrs = semantic;
      }
    }
  }
  est.correspondences = static_cast<int>(all_corrs.size());

  bool frame_registered = refined.has_value() && all_corrs.size() >= 4;

  // 4. Intrinsics: per-frame focal estimate, median-smoothed over the window.
  std::optional<Intrinsics> k_smooth;
  if (frame_registered) {
    std::optional<double> f_raw;
    try {
      f_raw = focal_from_homography(refined->model, cfg_.image_width, cfg_.image_height);
    } catch (const GeometryError&) {
      f_raw.reset();
      est.focal_fallback = true;
    }
    try {
      k_smooth = smooth_intrinsics(state_, f_raw, cfg_.image_width, cfg_.image_height);
    } catch (const FilterError&) {
      k_smooth.reset();  // focal unobservable and no history yet
    }
  }

  // 5. Direct pose from the decomposition of the refined homography.
  std::optional<Pose> direct;
  if (frame_registered && k_smooth) {
    try {
      direct = decompose_homography(refined->model, *k_smooth, template_points_);
    } catch (const GeometryError&) {
      direct.reset();
    }
  }
  frame_registered = frame_registered && k_smooth.has_value() && direct.has_value();

  if (!frame_registered) {
    // Coast: prediction only, no reweighting.
    if (cfg_.use_filter && state_.initialized && state_.smoothed) {
      perturb(state_);
      est.pose = estimate_pose(state_);
      est.intrinsics = *state_.smoothed;
      est.status = FrameStatus::coasting;
    } else {
      est.status = FrameStatus::unregistered;
    }
    est.elapsed_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t_start)
                         .count();
    return est;
  }

  est.status = FrameStatus::registered;
  est.intrinsics = *k_smooth;
  est.direct = direct;

  // Correspondences validated by the homography consensus drive refinement.
  std::vector<Correspondence> inlier_corrs;
  for (std::size_t i = 0; i < all_corrs.size(); ++i) {
    if (i < refined->inliers.size() && refined->inliers[i]) {
      inlier_corrs.push_back(all_corrs[i]);
    }
  }
  if (inlier_corrs.size() < 4) inlier_corrs = all_corrs;

  if (!cfg_.use_filter) {
    const RefineResult r = refine_pose(*direct, *k_smooth, inlier_corrs);
    est.pose = r.pose;
    est.refine_diverged = !r.reduced_cost && r.initial_cost > 1e-12;
    est.inliers_direct =
        count_inliers(*k_smooth, *direct, all_corrs, cfg_.filter.reinit_radius_px);
    est.inliers_filtered =
        count_inliers(*k_smooth, est.pose, all_corrs, cfg_.filter.reinit_radius_px);
    est.elapsed_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t_start)
                         .count();
    return est;
  }

  // 6. Particle filter: predict, weight, take the expectation.
  if (!state_.initialized) {
    initialize_particles(state_, *direct);
    est.reinitialized = true;
  } else {
    resample(state_);
    perturb(state_);
  }
  WeightObservations obs{*k_smooth, semantic, player_dets, frame.player_positions};
  est.weights_uniform = compute_weights(state_, obs);
  Pose filtered = estimate_pose(state_);

  // 7. Refine the filter output against this frame's validated
  // correspondences.
  const RefineResult r = refine_pose(filtered, *k_smooth, inlier_corrs);
  filtered = r.pose;
  est.refine_diverged = !r.reduced_cost && r.initial_cost > 1e-12;
  est.pose = filtered;

  // 8. Fall back to the direct estimate when it explains more of the frame.
  est.inliers_direct =
      count_inliers(*k_smooth, *direct, all_corrs, cfg_.filter.reinit_radius_px);
  est.inliers_filtered =
      count_inliers(*k_smooth, filtered, all_corrs, cfg_.filter.reinit_radius_px);
  if (est.inliers_direct > est.inliers_filtered) {
    initialize_particles(state_, *direct);
    est.reinitialized = true;
  }

  est.elapsed_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - t_start)
                       .count();
  return est;
}

}  // namespace fieldcal
