#include "skyanchor/geometry.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "skyanchor/error.hpp"

namespace skyanchor {

namespace {

constexpr double kOrthoDriftTol = 1e-9;

double orthonormality_error(const Mat3& r) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
}

}  // namespace

Pose Pose::from_matrix(const Mat4& m) {
  Pose p;
  p.rotation = m.topLeftCorner<3, 3>();
  p.translation = m.topRightCorner<3, 1>();
  return p;
}

Mat4 Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

bool Pose::is_valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  return orthonormality_error(rotation) <= tol &&
         std::abs(rotation.determinant() - 1.0) <= tol;
}

Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  if (orthonormality_error(out.rotation) > kOrthoDriftTol)
    out.rotation = nearest_rotation(out.rotation);
  return out;
}

Pose invert(const Pose& p) {
  Pose out;
  out.rotation = p.rotation.transpose();
  out.translation = -(out.rotation * p.translation);
  return out;
}

Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  return u * v.transpose();
}

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

Mat3 exp_so3(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 k = skew(omega);
  if (theta < 1e-8) {
    // second-order Taylor expansion
    return Mat3::Identity() + k + 0.5 * k * k;
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Mat3::Identity() + a * k + b * k * k;
}

Vec3 log_so3(const Mat3& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

double rotation_distance_deg(const Mat3& a, const Mat3& b) {
  const Mat3 rel = a.transpose() * b;
  const double c = std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0);
  // acos loses precision near 0; use the sine from the skew part as well
  const Vec3 w(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0),
               rel(1, 0) - rel(0, 1));
  const double s = 0.5 * w.norm();
  return std::atan2(s, c) * 180.0 / std::numbers::pi;
}

Mat3 slerp(const Mat3& a, const Mat3& b, double alpha) {
  const Vec3 delta = log_so3(a.transpose() * b);
  if (delta.norm() == 0.0) return a;
  return nearest_rotation(a * exp_so3(alpha * delta));
}

Mat3 rotation_between(const Vec3& from, const Vec3& to) {
  const Vec3 f = from.normalized();
  const Vec3 t = to.normalized();
  const Vec3 axis = f.cross(t);
  const double s = axis.norm();
  const double c = f.dot(t);
  if (s < 1e-15) {
    if (c > 0.0) return Mat3::Identity();
    // antiparallel: rotate pi about any axis orthogonal to f
    Vec3 ortho = f.unitOrthogonal();
    return Eigen::AngleAxisd(std::numbers::pi, ortho).toRotationMatrix();
  }
  return Eigen::AngleAxisd(std::atan2(s, c), axis / s).toRotationMatrix();
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0))
    fail(ErrorCode::InvalidIntrinsics, "focal lengths must be positive");
  if (width <= 0 || height <= 0)
    fail(ErrorCode::InvalidIntrinsics, "image size must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
    fail(ErrorCode::InvalidIntrinsics, "principal point outside the image");
}

Mat3 CameraIntrinsics::matrix() const {
  Mat3 k;
  k << fx, 0.0, cx,
       0.0, fy, cy,
       0.0, 0.0, 1.0;
  return k;
}

Vec2 project(const CameraIntrinsics& k, const Pose& pose, const Vec3& point) {
  const Vec3 pc = pose.apply(point);
  if (pc.z() <= 1e-9)
    fail(ErrorCode::PointBehindCamera, "point is not in front of the camera");
  return {k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy};
}

}  // namespace skyanchor
