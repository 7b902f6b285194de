#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "skyanchor/geometry.hpp"

namespace skyanchor {

enum class PlaneOrientation { Horizontal, Vertical, Other };

std::string_view to_string(PlaneOrientation o);
PlaneOrientation orientation_from_string(std::string_view s);

/// Running first and second moments of a point set, enough to refit a
/// least-squares plane after merging.
struct PointMoments {
  std::size_t count = 0;
  Vec3 sum = Vec3::Zero();
  Mat3 outer = Mat3::Zero();  ///< sum of x xᵀ

  void add(const Vec3& p);
  PointMoments& operator+=(const PointMoments& other);
  Vec3 centroid() const;
  Mat3 covariance() const;  ///< about the centroid, divided by count
};

/// Infinite plane n·x = offset. Orientation is filled in by classify via
/// update_planes; a bare fit leaves it Other.
struct PlaneModel {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;
  std::size_t inlier_count = 0;
  PlaneOrientation orientation = PlaneOrientation::Other;
  int id = 0;
  PointMoments moments;

  double signed_distance(const Vec3& p) const { return normal.dot(p) - offset; }
  Vec3 project(const Vec3& p) const { return p - signed_distance(p) * normal; }
};

struct RansacParams {
  int iterations = 500;
  double inlier_tol = 0.01;  ///< meters
  std::size_t min_support = 20;
  std::uint64_t seed = 1;

  void validate() const;
};

struct PlaneThresholds {
  double horizontal_deg = 10.0;  ///< normal within this of gravity
  double vertical_deg = 80.0;    ///< normal beyond this from gravity
  double merge_angle_deg = 5.0;
  double merge_offset_m = 0.02;
};

struct PlaneFit {
  PlaneModel model;
  std::vector<std::size_t> inliers;  ///< indices into the input, ascending
};

/// Least-squares plane through the moments: centroid plus the eigenvector of
/// the smallest covariance eigenvalue. Sign chosen so offset >= 0.
PlaneModel plane_from_moments(const PointMoments& m);

/// Orients the normal so offset >= 0; on a plane through the origin the
/// largest-magnitude normal component is made positive.
void canonicalize_sign(PlaneModel& plane);

PlaneFit fit_plane_ransac_detailed(std::span<const Vec3> points, const RansacParams& params);
PlaneModel fit_plane_ransac(std::span<const Vec3> points, const RansacParams& params);

PlaneOrientation classify(const PlaneModel& plane, const Vec3& gravity,
                          const PlaneThresholds& thresholds = {});

/// Planes tracked across updates. Gravity is expressed in the world frame.
struct PlaneSet {
  std::vector<PlaneModel> planes;
  Vec3 gravity = Vec3(0.0, 0.0, -1.0);
  int next_id = 1;
  PlaneThresholds thresholds;

  const PlaneModel* find(int id) const;
};

/// True when the two planes describe the same surface within the merge
/// thresholds, accounting for opposite normal signs.
bool same_surface(const PlaneModel& a, const PlaneModel& b, const PlaneThresholds& t);

/// Extracts planes from the samples one at a time (each fit removes its
/// inliers) and merges each into a matching tracked plane or appends it.
/// Samples that support no plane leave the set unchanged.
PlaneSet update_planes(PlaneSet state, std::span<const Vec3> points, const RansacParams& params);

}  // namespace skyanchor
