#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace skyanchor {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// Frame conventions (right-handed throughout):
//   camera: +z forward, +x right, +y down
//   tag:    origin at the tag center, face in the z = 0 plane; a tag seen
//           fronto-parallel has the identity rotation relative to the camera
//           (tag +x = image right, tag +y = image down).

/// Rigid transform x' = rotation * x + translation.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }
  static Pose from_matrix(const Mat4& m);

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
  Mat4 matrix() const;

  /// Orthonormality and det(R) = +1 within `tol`.
  bool is_valid(double tol = 1e-9) const;
};

/// Returns the pose that applies `b` first, then `a`.
Pose compose(const Pose& a, const Pose& b);
Pose invert(const Pose& p);

/// Nearest rotation matrix (polar decomposition through the SVD).
Mat3 nearest_rotation(const Mat3& m);

/// Rodrigues exponential of an axis-angle vector.
Mat3 exp_so3(const Vec3& omega);
/// Inverse of exp_so3; angle in [0, pi].
Vec3 log_so3(const Mat3& r);
Mat3 skew(const Vec3& v);

/// Geodesic angle between two rotations, degrees.
double rotation_distance_deg(const Mat3& a, const Mat3& b);

/// Shortest-arc spherical interpolation; alpha = 0 gives `a`, 1 gives `b`.
Mat3 slerp(const Mat3& a, const Mat3& b, double alpha);

/// Smallest rotation taking unit vector `from` onto unit vector `to`.
Mat3 rotation_between(const Vec3& from, const Vec3& to);

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  /// Throws InvalidIntrinsics when the pinhole invariants do not hold.
  void validate() const;
  Mat3 matrix() const;
};

/// Pinhole projection of a point given in the frame that `pose` maps into
/// the camera frame. Pixel centers sit on integer coordinates.
Vec2 project(const CameraIntrinsics& k, const Pose& pose, const Vec3& point);

}  // namespace skyanchor
