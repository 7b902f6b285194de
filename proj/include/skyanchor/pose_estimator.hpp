#pragma once

#include <array>

#include <Eigen/Core>

#include "skyanchor/detector.hpp"
#include "skyanchor/geometry.hpp"

namespace skyanchor {

struct PoseEstimate {
  Pose pose;  ///< tag frame -> camera frame
  double reprojection_rms = 0.0;
  int iterations = 0;
};

using CornerResidual = Eigen::Matrix<double, 8, 1>;
using CornerJacobian = Eigen::Matrix<double, 8, 6>;
using PoseDelta = Eigen::Matrix<double, 6, 1>;

/// Planar decomposition of a tag-unit -> pixel homography.
Pose pose_from_homography(const Mat3& h, const CameraIntrinsics& k, double tag_size);

/// Gauss-Newton on the four corner reprojection errors.
PoseEstimate refine_pose(const Pose& initial, const std::array<Vec2, 4>& corners,
                         const CameraIntrinsics& k, double tag_size);

/// Homography decomposition followed by refinement from both sides of the
/// planar ambiguity; the candidate with the lower RMS wins.
PoseEstimate estimate(const TagDetection& detection, const CameraIntrinsics& k, double tag_size);

// Building blocks, public for gradient checks.

/// Rotation perturbed on the left: (exp(w) R, t + dt) for delta = [w, dt].
Pose perturb(const Pose& p, const PoseDelta& delta);

/// Projected tag corners minus observed corners, stacked (u0, v0, u1, ...).
CornerResidual reprojection_residuals(const Pose& p, const std::array<Vec2, 4>& corners,
                                      const CameraIntrinsics& k, double tag_size);

/// d residual / d delta at delta = 0.
CornerJacobian reprojection_jacobian(const Pose& p, const CameraIntrinsics& k, double tag_size);

/// Root-mean-square corner distance in pixels.
double reprojection_rms(const Pose& p, const std::array<Vec2, 4>& corners,
                        const CameraIntrinsics& k, double tag_size);

}  // namespace skyanchor
