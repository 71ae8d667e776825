#include "fieldcal/geometry.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>

namespace fieldcal {

namespace {

constexpr double kTinyW = 1e-12;
// Residual used for points that project behind the camera during refinement;
// large enough to dominate, finite so cost comparisons stay meaningful.
constexpr double kBehindCameraResidual = 1e4;

Mat3 normalized_homography_matrix(const Mat3& m) {
  const double norm = m.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw GeometryError("homography matrix is zero or non-finite");
  }
  Mat3 out = m / norm;
  double sign_ref = out(2, 2);
  if (std::abs(sign_ref) < 1e-12) {
    // Degenerate bottom-right entry: fix the sign with the largest entry so
    // construction stays deterministic.
    Eigen::Index r = 0, c = 0;
    out.cwiseAbs().maxCoeff(&r, &c);
    sign_ref = out(r, c);
  }
  if (sign_ref < 0.0) out = -out;
  return out;
}

// Similarity moving the centroid to the origin and the mean radius to sqrt(2).
Mat3 isotropic_normalizer(std::span<const Vec2> pts) {
  Vec2 centroid = Vec2::Zero();
  for (const Vec2& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const Vec2& p : pts) mean_dist += (p - centroid).norm();
  mean_dist /= static_cast<double>(pts.size());
  if (mean_dist < 1e-12) {
    throw DegenerateConfiguration("coincident points");
  }
  const double s = std::sqrt(2.0) / mean_dist;
  Mat3 t = Mat3::Identity();
  t(0, 0) = s;
  t(1, 1) = s;
  t(0, 2) = -s * centroid.x();
  t(1, 2) = -s * centroid.y();
  return t;
}

void check_not_collinear(std::span<const Correspondence> corrs) {
  Vec2 mean = Vec2::Zero();
  for (const Correspondence& c : corrs) mean += c.world;
  mean /= static_cast<double>(corrs.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const Correspondence& c : corrs) {
    const Vec2 d = c.world - mean;
    cov += d * d.transpose();
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  const double lo = std::max(eig.eigenvalues()(0), 0.0);
  const double hi = std::max(eig.eigenvalues()(1), 0.0);
  if (std::sqrt(lo) <= 1e-9 * std::max(std::sqrt(hi), 1e-12)) {
    throw DegenerateConfiguration("collinear world points");
  }
}

struct TransferScorer {
  Mat3 h;
  Mat3 h_inv;
  explicit TransferScorer(const Homography& model)
      : h(model.matrix()), h_inv(model.inverse().matrix()) {}
  double operator()(const Correspondence& c) const {
    return symmetric_transfer_error_px(h, h_inv, c);
  }
};

int update_required_iters(int inliers, int total, double confidence, int cap) {
  const double w = static_cast<double>(inliers) / static_cast<double>(total);
  const double p_sample = std::pow(w, 4.0);
  if (p_sample >= 1.0) return 1;
  if (p_sample <= 0.0) return cap;
  const double denom = std::log(1.0 - p_sample);
  if (denom >= 0.0) return cap;
  const double n = std::log(std::max(1.0 - confidence, 1e-300)) / denom;
  if (!(n > 0.0)) return 1;
  if (n >= static_cast<double>(cap)) return cap;
  return static_cast<int>(std::ceil(n));
}

}  // namespace

Homography::Homography(const Mat3& m) : m_(normalized_homography_matrix(m)) {
  const Eigen::JacobiSVD<Mat3> svd(m_);
  const double smin = svd.singularValues()(2);
  const double smax = svd.singularValues()(0);
  if (!(smin > 0.0) || smax / smin >= 1e12) {
    throw GeometryError("homography is rank deficient");
  }
}

Homography Homography::inverse() const { return Homography(Mat3(m_.inverse())); }

std::optional<Vec2> Homography::try_map(const Vec2& p) const {
  const Vec3 q = m_ * Vec3(p.x(), p.y(), 1.0);
  if (std::abs(q.z()) < kTinyW) return std::nullopt;
  return Vec2(q.x() / q.z(), q.y() / q.z());
}

Vec2 Homography::map(const Vec2& p) const {
  const auto q = try_map(p);
  if (!q) throw GeometryError("point maps through infinity");
  return *q;
}

Mat3 Intrinsics::matrix() const {
  Mat3 k = Mat3::Identity();
  k(0, 0) = f;
  k(1, 1) = f;
  k(0, 2) = width / 2.0;
  k(1, 2) = height / 2.0;
  return k;
}

Mat3 Intrinsics::inverse_matrix() const {
  Mat3 k = Mat3::Identity();
  k(0, 0) = 1.0 / f;
  k(1, 1) = 1.0 / f;
  k(0, 2) = -width / (2.0 * f);
  k(1, 2) = -height / (2.0 * f);
  return k;
}

bool Pose::valid_rotation(double tol) const {
  const Mat3 rtr = rotation.transpose() * rotation;
  if ((rtr - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(rotation.determinant() - 1.0) <= tol;
}

Projection project(const Intrinsics& k, const Pose& pose, const Vec3& world) {
  if (!k.valid()) throw GeometryError("invalid intrinsics");
  const Vec3 cam = pose.rotation * world + pose.translation;
  if (std::abs(cam.z()) < kTinyW) throw GeometryError("zero-depth projection");
  Projection out;
  out.depth = cam.z();
  out.px.x() = k.f * cam.x() / cam.z() + k.width / 2.0;
  out.px.y() = k.f * cam.y() / cam.z() + k.height / 2.0;
  return out;
}

Projection project_ground(const Intrinsics& k, const Pose& pose, const Vec2& world_xy) {
  return project(k, pose, Vec3(world_xy.x(), world_xy.y(), 0.0));
}

Homography homography_from_pose(const Intrinsics& k, const Pose& pose) {
  if (!k.valid()) throw GeometryError("invalid intrinsics");
  Mat3 rt;
  rt.col(0) = pose.rotation.col(0);
  rt.col(1) = pose.rotation.col(1);
  rt.col(2) = pose.translation;
  return Homography(Mat3(k.matrix() * rt));
}

Homography estimate_homography_dlt(std::span<const Correspondence> corrs) {
  const std::size_t n = corrs.size();
  if (n < 4) throw DegenerateConfiguration("insufficient correspondences");
  check_not_collinear(corrs);

  std::vector<Vec2> world(n), image(n);
  for (std::size_t i = 0; i < n; ++i) {
    world[i] = corrs[i].world;
    image[i] = corrs[i].image;
  }
  const Mat3 tw = isotropic_normalizer(world);
  const Mat3 ti = isotropic_normalizer(image);

  Eigen::MatrixXd a(2 * n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 xw = tw * Vec3(world[i].x(), world[i].y(), 1.0);
    const Vec3 xi = ti * Vec3(image[i].x(), image[i].y(), 1.0);
    const double x = xw.x(), y = xw.y(), w = xw.z();
    const double u = xi.x(), v = xi.y();
    a.row(2 * i) << 0.0, 0.0, 0.0, -x, -y, -w, v * x, v * y, v * w;
    a.row(2 * i + 1) << x, y, w, 0.0, 0.0, 0.0, -u * x, -u * y, -u * w;
  }

  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Mat3 hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  return Homography(Mat3(ti.inverse() * hn * tw));
}

double symmetric_transfer_error_px(const Mat3& h, const Mat3& h_inv, const Correspondence& c) {
  const Vec3 fwd = h * Vec3(c.world.x(), c.world.y(), 1.0);
  if (std::abs(fwd.z()) < kTinyW) return std::numeric_limits<double>::infinity();
  const Vec2 proj(fwd.x() / fwd.z(), fwd.y() / fwd.z());
  const double e_fwd = (proj - c.image).norm();

  const Vec3 bwd = h_inv * Vec3(c.image.x(), c.image.y(), 1.0);
  if (std::abs(bwd.z()) < kTinyW) return std::numeric_limits<double>::infinity();
  const Vec2 back(bwd.x() / bwd.z(), bwd.y() / bwd.z());
  const double e_bwd_m = (back - c.world).norm();

  // Local world-to-image scale of H at the world point: converts the inverse
  // transfer error (meters) to pixels.
  const double w = fwd.z();
  const double j00 = (h(0, 0) - proj.x() * h(2, 0)) / w;
  const double j01 = (h(0, 1) - proj.x() * h(2, 1)) / w;
  const double j10 = (h(1, 0) - proj.y() * h(2, 0)) / w;
  const double j11 = (h(1, 1) - proj.y() * h(2, 1)) / w;
  const double scale = std::sqrt(std::abs(j00 * j11 - j01 * j10));

  return e_fwd + scale * e_bwd_m;
}

RansacResult estimate_homography_ransac(std::span<const Correspondence> corrs,
                                        const RansacConfig& cfg) {
  const int n = static_cast<int>(corrs.size());
  if (n < 4) throw DegenerateConfiguration("insufficient correspondences");

  std::vector<int> semantic_idx;
  if (cfg.min_semantic_in_sample > 0) {
    for (int i = 0; i < n; ++i) {
      if (corrs[i].source == PointSource::semantic) semantic_idx.push_back(i);
    }
    if (static_cast<int>(semantic_idx.size()) < cfg.min_semantic_in_sample) {
      throw RansacFailure("not enough semantic correspondences for sampling");
    }
  }

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> pick_all(0, n - 1);

  std::optional<Homography> best;
  int best_count = -1;
  std::vector<bool> best_mask(corrs.size(), false);
  int required = cfg.max_iters;

  for (int iter = 0; iter < required && iter < cfg.max_iters; ++iter) {
    // Draw 4 distinct indices, forcing the first `min_semantic_in_sample`
    // to come from the semantic pool.
    std::array<int, 4> sample{};
    int have = 0;
    bool ok = true;
    if (cfg.min_semantic_in_sample > 0) {
      std::uniform_int_distribution<int> pick_sem(
          0, static_cast<int>(semantic_idx.size()) - 1);
      int guard = 0;
      while (have < std::min(cfg.min_semantic_in_sample, 4)) {
        const int cand = semantic_idx[pick_sem(rng)];
        if (std::find(sample.begin(), sample.begin() + have, cand) ==
            sample.begin() + have) {
          sample[have++] = cand;
        }
        if (++guard > 256) { ok = false; break; }
      }
    }
    int guard = 0;
    while (ok && have < 4) {
      const int cand = pick_all(rng);
      if (std::find(sample.begin(), sample.begin() + have, cand) ==
          sample.begin() + have) {
        sample[have++] = cand;
      }
      if (++guard > 1024) { ok = false; break; }
    }
    if (!ok) continue;

    std::array<Correspondence, 4> subset;
    for (int i = 0; i < 4; ++i) subset[i] = corrs[sample[i]];

    Homography model;
    try {
      model = estimate_homography_dlt(subset);
    } catch (const GeometryError&) {
      continue;  // degenerate sample
    }

    const TransferScorer score(model);
    int count = 0;
    for (const Correspondence& c : corrs) {
      if (score(c) < cfg.threshold_px) ++count;
    }
    if (count > best_count) {
      best_count = count;
      best = model;
      required = update_required_iters(count, n, cfg.confidence, cfg.max_iters);
    }
  }

  if (!best || best_count < 4) {
    throw RansacFailure("no consensus model found");
  }

  // Refit on the consensus set until the mask stabilizes so the returned
  // model is the DLT fit of exactly the returned inliers.
  TransferScorer score(*best);
  std::vector<bool> mask(corrs.size(), false);
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    mask[i] = score(corrs[i]) < cfg.threshold_px;
  }
  RansacResult out;
  out.model = *best;
  for (int round = 0; round < 10; ++round) {
    std::vector<Correspondence> inl;
    for (std::size_t i = 0; i < corrs.size(); ++i) {
      if (mask[i]) inl.push_back(corrs[i]);
    }
    if (inl.size() < 4) break;
    Homography refit;
    try {
      refit = estimate_homography_dlt(inl);
    } catch (const GeometryError&) {
      break;
    }
    const TransferScorer rescore(refit);
    std::vector<bool> next(corrs.size(), false);
    int count = 0;
    for (std::size_t i = 0; i < corrs.size(); ++i) {
      next[i] = rescore(corrs[i]) < cfg.threshold_px;
      count += next[i] ? 1 : 0;
    }
    if (count < 4) break;
    out.model = refit;
    const bool stable = (next == mask);
    mask = next;
    if (stable) break;
  }
  out.inliers = mask;
  out.inlier_count = static_cast<int>(std::count(mask.begin(), mask.end(), true));
  if (out.inlier_count < 4) throw RansacFailure("consensus set collapsed");
  return out;
}

// With the principal point moved to the origin, K^-1 H = [r1 r2 t] / lambda
// up to scale. Writing the shifted homography columns as (a_j, b_j, c_j), the
// orthogonality constraint r1.r2 = 0 gives
//   f^2 = -(a1 a2 + b1 b2) / (c1 c2)
// and the equal-norm constraint |r1| = |r2| gives
//   f^2 = -(a1^2 + b1^2 - a2^2 - b2^2) / ((c1 + c2)(c1 - c2)).
// The better-conditioned variant (larger denominator magnitude) wins. The
// shifted matrix is rescaled so its third row has unit norm, which makes the
// 1e-12 denominator cutoff independent of the overall homography scale.
double focal_from_homography(const Homography& h, double width, double height) {
  const Mat3& m = h.matrix();
  const double u0 = width / 2.0;
  const double v0 = height / 2.0;

  double a1 = m(0, 0) - u0 * m(2, 0);
  double b1 = m(1, 0) - v0 * m(2, 0);
  double c1 = m(2, 0);
  double a2 = m(0, 1) - u0 * m(2, 1);
  double b2 = m(1, 1) - v0 * m(2, 1);
  double c2 = m(2, 1);
  const double c3 = m(2, 2);

  const double row_norm = std::sqrt(c1 * c1 + c2 * c2 + c3 * c3);
  if (row_norm < 1e-15) throw FocalUnobservable("degenerate perspective row");
  a1 /= row_norm;
  b1 /= row_norm;
  c1 /= row_norm;
  a2 /= row_norm;
  b2 /= row_norm;
  c2 /= row_norm;

  const double den1 = c1 * c2;
  const double den2 = (c1 + c2) * (c1 - c2);
  if (std::max(std::abs(den1), std::abs(den2)) < 1e-12) {
    throw FocalUnobservable("focal unobservable");
  }

  double f2 = 0.0;
  if (std::abs(den1) > std::abs(den2)) {
    f2 = -(a1 * a2 + b1 * b2) / den1;
  } else {
    f2 = -(a1 * a1 + b1 * b1 - a2 * a2 - b2 * b2) / den2;
  }
  if (!(f2 > 0.0)) throw FocalInconsistent("inconsistent homography");
  return std::sqrt(f2);
}

Pose decompose_homography(const Homography& h, const Intrinsics& k,
                          std::span<const Vec2> world_pts) {
  if (!k.valid()) throw GeometryError("invalid intrinsics");
  const Mat3 a = k.inverse_matrix() * h.matrix();
  const double lambda = (a.col(0).norm() + a.col(1).norm()) / 2.0;
  if (lambda < 1e-15) throw GeometryError("degenerate homography decomposition");

  const Vec2 origin = Vec2::Zero();
  std::span<const Vec2> votes =
      world_pts.empty() ? std::span<const Vec2>(&origin, 1) : world_pts;

  Pose best;
  int best_votes = -1;
  for (const double sign : {1.0, -1.0}) {
    const Mat3 b = (sign / lambda) * a;
    Mat3 rt;
    rt.col(0) = b.col(0);
    rt.col(1) = b.col(1);
    rt.col(2) = b.col(0).cross(b.col(1));

    const Eigen::JacobiSVD<Mat3> svd(rt, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0.0) {
      r = svd.matrixU() * Eigen::DiagonalMatrix<double, 3>(1.0, 1.0, -1.0) *
          svd.matrixV().transpose();
    }
    if (std::abs(r.determinant() - 1.0) > 1e-6) {
      throw GeometryError("rotation projection failed");
    }

    Pose cand;
    cand.rotation = r;
    cand.translation = b.col(2);
    int front = 0;
    for (const Vec2& p : votes) {
      const double depth = r(2, 0) * p.x() + r(2, 1) * p.y() + cand.translation.z();
      if (depth > 0.0) ++front;
    }
    if (front > best_votes) {
      best_votes = front;
      best = cand;
    }
  }
  if (best_votes <= 0) {
    throw GeometryError("all reference points behind camera under both signs");
  }
  return best;
}

namespace detail {

void reprojection_system(const Pose& pose, const Intrinsics& k,
                         std::span<const Correspondence> corrs,
                         Eigen::VectorXd& residuals, Eigen::MatrixXd& jacobian) {
  const std::size_t n = corrs.size();
  residuals.resize(2 * n);
  jacobian.resize(2 * n, 6);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 world(corrs[i].world.x(), corrs[i].world.y(), 0.0);
    const Vec3 cam = pose.rotation * world + pose.translation;
    if (cam.z() < kTinyW) {
      residuals(2 * i) = kBehindCameraResidual;
      residuals(2 * i + 1) = kBehindCameraResidual;
      jacobian.row(2 * i).setZero();
      jacobian.row(2 * i + 1).setZero();
      continue;
    }
    const double z = cam.z();
    const Vec2 proj(k.f * cam.x() / z + k.width / 2.0,
                    k.f * cam.y() / z + k.height / 2.0);
    residuals(2 * i) = corrs[i].image.x() - proj.x();
    residuals(2 * i + 1) = corrs[i].image.y() - proj.y();

    Eigen::Matrix<double, 2, 3> dpix_dcam;
    dpix_dcam << k.f / z, 0.0, -k.f * cam.x() / (z * z),
                 0.0, k.f / z, -k.f * cam.y() / (z * z);

    // Right-multiplied increment: cam(w) = R * exp([w]x) * X + t, so
    // d(cam)/dw = -R * [X]x and d(cam)/dt = I.
    Mat3 skew;
    skew << 0.0, -world.z(), world.y(),
            world.z(), 0.0, -world.x(),
            -world.y(), world.x(), 0.0;
    const Mat3 dcam_dw = -pose.rotation * skew;

    jacobian.block<2, 3>(2 * i, 0) = dpix_dcam * dcam_dw;
    jacobian.block<2, 3>(2 * i, 3) = dpix_dcam;
  }
}

double reprojection_cost(const Pose& pose, const Intrinsics& k,
                         std::span<const Correspondence> corrs) {
  double cost = 0.0;
  for (const Correspondence& c : corrs) {
    const Vec3 world(c.world.x(), c.world.y(), 0.0);
    const Vec3 cam = pose.rotation * world + pose.translation;
    if (cam.z() < kTinyW) {
      cost += 2.0 * kBehindCameraResidual * kBehindCameraResidual;
      continue;
    }
    const Vec2 proj(k.f * cam.x() / cam.z() + k.width / 2.0,
                    k.f * cam.y() / cam.z() + k.height / 2.0);
    cost += (c.image - proj).squaredNorm();
  }
  return cost;
}

Pose apply_increment(const Pose& pose, const Eigen::Matrix<double, 6, 1>& delta) {
  Pose out;
  const Vec3 w = delta.head<3>();
  const double angle = w.norm();
  Mat3 dr = Mat3::Identity();
  if (angle > 0.0) {
    dr = Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
  }
  out.rotation = pose.rotation * dr;
  out.translation = pose.translation + delta.tail<3>();
  return out;
}

}  // namespace detail

RefineResult refine_pose(const Pose& pose, const Intrinsics& k,
                         std::span<const Correspondence> corrs,
                         const RefineOptions& opts) {
  if (!k.valid()) throw GeometryError("invalid intrinsics");
  RefineResult result;
  result.pose = pose;
  result.initial_cost = detail::reprojection_cost(pose, k, corrs);
  result.final_cost = result.initial_cost;
  if (corrs.empty()) return result;

  Pose current = pose;
  double cost = result.initial_cost;
  double lambda = opts.initial_lambda;

  Eigen::VectorXd r;
  Eigen::MatrixXd j;
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    detail::reprojection_system(current, k, corrs, r, j);
    const Eigen::Matrix<double, 6, 1> g = j.transpose() * r;
    if (g.cwiseAbs().maxCoeff() < 1e-12) break;
    const Eigen::Matrix<double, 6, 6> jtj = j.transpose() * j;

    bool accepted = false;
    double new_cost = cost;
    for (int attempt = 0; attempt < 10; ++attempt) {
      Eigen::Matrix<double, 6, 6> damped = jtj;
      for (int d = 0; d < 6; ++d) {
        damped(d, d) += lambda * std::max(jtj(d, d), 1e-12);
      }
      const Eigen::Matrix<double, 6, 1> delta = damped.ldlt().solve(g);
      if (!delta.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      const Pose candidate = detail::apply_increment(current, delta);
      new_cost = detail::reprojection_cost(candidate, k, corrs);
      if (new_cost < cost) {
        current = candidate;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        result.reduced_cost = true;
        break;
      }
      lambda *= 10.0;
      if (lambda > 1e12) break;
    }
    if (!accepted) break;
    const double drop = cost - new_cost;
    cost = new_cost;
    if (drop < 1e-15 * std::max(cost, 1e-30)) break;
  }

  if (cost < result.initial_cost) {
    result.pose = current;
    result.final_cost = cost;
  }
  return result;
}

int count_inliers(const Intrinsics& k, const Pose& pose,
                  std::span<const Correspondence> corrs, double radius_px) {
  int count = 0;
  for (const Correspondence& c : corrs) {
    const Vec3 world(c.world.x(), c.world.y(), 0.0);
    const Vec3 cam = pose.rotation * world + pose.translation;
    if (cam.z() < kTinyW) continue;
    const Vec2 proj(k.f * cam.x() / cam.z() + k.width / 2.0,
                    k.f * cam.y() / cam.z() + k.height / 2.0);
    if ((proj - c.image).norm() <= radius_px) ++count;
  }
  return count;
}

}  // namespace fieldcal
