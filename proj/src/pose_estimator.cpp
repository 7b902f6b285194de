#include "skyanchor/pose_estimator.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <cmath>
#include <optional>

#include "skyanchor/error.hpp"
#include "skyanchor/render.hpp"

namespace skyanchor {

namespace {

constexpr int kMaxIterations = 50;
constexpr double kMinStep = 1e-10;
constexpr double kMinDecrease = 1e-12;

void check_inputs(const CameraIntrinsics& k, double tag_size) {
  if (!(k.fx > 0.0) || !(k.fy > 0.0))
    fail(ErrorCode::SingularIntrinsics, "intrinsics are not invertible");
  if (!(tag_size > 0.0)) fail(ErrorCode::NonPositiveTagSize, "tag size must be positive");
}

bool corners_in_front(const Pose& p, double tag_size) {
  for (const Vec3& c : tag_corner_points(tag_size))
    if (p.apply(c).z() <= 0.0) return false;
  return true;
}

double squared_error(const Pose& p, const std::array<Vec2, 4>& corners,
                     const CameraIntrinsics& k, double tag_size) {
  return reprojection_residuals(p, corners, k, tag_size).squaredNorm();
}

}  // namespace

Pose pose_from_homography(const Mat3& h, const CameraIntrinsics& k, double tag_size) {
  check_inputs(k, tag_size);
  if (!h.allFinite()) fail(ErrorCode::DegenerateHomography, "homography is not finite");

  const Mat3 m = k.matrix().inverse() * h;
  const Vec3 m1 = m.col(0), m2 = m.col(1), m3 = m.col(2);
  const double n1 = m1.norm(), n2 = m2.norm();
  if (n1 < 1e-12 || n2 < 1e-12 || std::min(n1, n2) / std::max(n1, n2) < 1e-6)
    fail(ErrorCode::DegenerateHomography, "homography columns collapse");
  if (std::abs(m1.dot(m2)) / (n1 * n2) > 0.99)
    fail(ErrorCode::DegenerateHomography, "homography columns are parallel");
  Eigen::JacobiSVD<Mat3> svd(m);
  if (svd.singularValues()(2) / svd.singularValues()(0) < 1e-10)
    fail(ErrorCode::DegenerateHomography, "homography is singular");

  const double scale = 2.0 / (n1 + n2);
  Vec3 r1 = scale * m1, r2 = scale * m2, t = scale * m3;
  if (t.z() < 0.0) {
    r1 = -r1;
    r2 = -r2;
    t = -t;
  }
  Mat3 r;
  r.col(0) = r1;
  r.col(1) = r2;
  r.col(2) = r1.cross(r2);

  Pose pose;
  pose.rotation = nearest_rotation(r);
  pose.translation = tag_size * t;
  return pose;
}

Pose perturb(const Pose& p, const PoseDelta& delta) {
  Pose out;
  out.rotation = exp_so3(delta.head<3>()) * p.rotation;
  out.translation = p.translation + delta.tail<3>();
  return out;
}

CornerResidual reprojection_residuals(const Pose& p, const std::array<Vec2, 4>& corners,
                                      const CameraIntrinsics& k, double tag_size) {
  const auto model = tag_corner_points(tag_size);
  CornerResidual r;
  for (int i = 0; i < 4; ++i) {
    const Vec3 pc = p.apply(model[i]);
    r(2 * i) = k.fx * pc.x() / pc.z() + k.cx - corners[i].x();
    r(2 * i + 1) = k.fy * pc.y() / pc.z() + k.cy - corners[i].y();
  }
  return r;
}

CornerJacobian reprojection_jacobian(const Pose& p, const CameraIntrinsics& k, double tag_size) {
  const auto model = tag_corner_points(tag_size);
  CornerJacobian j;
  for (int i = 0; i < 4; ++i) {
    const Vec3 rp = p.rotation * model[i];
    const Vec3 pc = rp + p.translation;
    const double iz = 1.0 / pc.z();
    Eigen::Matrix<double, 2, 3> dproj;
    dproj << k.fx * iz, 0.0, -k.fx * pc.x() * iz * iz,
             0.0, k.fy * iz, -k.fy * pc.y() * iz * iz;
    // exp(w) R X ~ R X + w x (R X), so d pc / d w = -[R X]x
    j.block<2, 3>(2 * i, 0) = dproj * (-skew(rp));
    j.block<2, 3>(2 * i, 3) = dproj;
  }
  return j;
}

double reprojection_rms(const Pose& p, const std::array<Vec2, 4>& corners,
                        const CameraIntrinsics& k, double tag_size) {
  return std::sqrt(squared_error(p, corners, k, tag_size) / 4.0);
}

PoseEstimate refine_pose(const Pose& initial, const std::array<Vec2, 4>& corners,
                         const CameraIntrinsics& k, double tag_size) {
  check_inputs(k, tag_size);
  if (!corners_in_front(initial, tag_size))
    fail(ErrorCode::DivergedBehindCamera, "initial pose puts a corner behind the camera");

  Pose current = initial;
  double err = squared_error(current, corners, k, tag_size);
  int iterations = 0;
  while (iterations < kMaxIterations) {
    ++iterations;
    const CornerJacobian j = reprojection_jacobian(current, k, tag_size);
    const CornerResidual r = reprojection_residuals(current, corners, k, tag_size);
    const Eigen::Matrix<double, 6, 6> jtj = j.transpose() * j;
    const PoseDelta step = jtj.ldlt().solve(-j.transpose() * r);
    if (!step.allFinite() || step.norm() < kMinStep) break;

    const Pose full = perturb(current, step);
    if (!corners_in_front(full, tag_size))
      fail(ErrorCode::DivergedBehindCamera, "refinement moved a corner behind the camera");

    // Backtrack so the error never increases.
    std::optional<Pose> accepted;
    double accepted_err = err;
    double scale = 1.0;
    for (int tries = 0; tries < 10; ++tries, scale *= 0.5) {
      const Pose trial = scale == 1.0 ? full : perturb(current, scale * step);
      if (!corners_in_front(trial, tag_size)) continue;
      const double trial_err = squared_error(trial, corners, k, tag_size);
      if (trial_err < err) {
        accepted = trial;
        accepted_err = trial_err;
        break;
      }
    }
    if (!accepted) break;
    const double decrease = err - accepted_err;
    current = *accepted;
    current.rotation = nearest_rotation(current.rotation);
    err = squared_error(current, corners, k, tag_size);
    if (decrease < kMinDecrease || scale * step.norm() < kMinStep) break;
  }
  return {current, std::sqrt(err / 4.0), iterations};
}

PoseEstimate estimate(const TagDetection& detection, const CameraIntrinsics& k, double tag_size) {
  check_inputs(k, tag_size);
  const auto& c = detection.corners;
  double area2 = 0.0, perimeter = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Vec2& p = c[i];
    const Vec2& q = c[(i + 1) % 4];
    area2 += p.x() * q.y() - q.x() * p.y();
    perimeter += (q - p).norm();
  }
  if (!(std::abs(area2) > 1e-9 * perimeter * perimeter))
    fail(ErrorCode::DegenerateHomography, "detection corners are collinear");

  const Pose first = pose_from_homography(detection.homography, k, tag_size);

  // Second planar solution: the tag normal mirrored about the line of sight.
  std::optional<Pose> second;
  const Vec3 normal = first.rotation.col(2);
  const Vec3 sight = first.translation.normalized();
  const Vec3 mirrored = 2.0 * normal.dot(sight) * sight - normal;
  if ((mirrored - normal).norm() > 1e-6) {
    Pose alt = first;
    alt.rotation = nearest_rotation(rotation_between(normal, mirrored) * first.rotation);
    second = alt;
  }

  std::optional<PoseEstimate> best;
  std::optional<Error> first_error;
  for (const auto& candidate : {std::optional<Pose>(first), second}) {
    if (!candidate) continue;
    try {
      PoseEstimate est = refine_pose(*candidate, c, k, tag_size);
      if (!best || est.reprojection_rms < best->reprojection_rms) best = est;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DivergedBehindCamera) throw;
      if (!first_error) first_error = e;
    }
  }
  if (!best) throw *first_error;
  return *best;
}

}  // namespace skyanchor
