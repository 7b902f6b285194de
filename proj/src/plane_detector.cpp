#include "skyanchor/plane_detector.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <string>

#include <Eigen/Eigenvalues>

#include "skyanchor/error.hpp"

namespace skyanchor {

namespace {

double cos_deg(double deg) { return std::cos(deg * std::numbers::pi / 180.0); }

struct Hypothesis {
  Vec3 normal;
  double offset;
};

// Inliers of a hypothesis and the RMS of their distances.
std::pair<std::size_t, double> score(std::span<const Vec3> points, const Hypothesis& h, double tol) {
  std::size_t count = 0;
  double sq = 0.0;
  for (const Vec3& p : points) {
    const double d = std::abs(h.normal.dot(p) - h.offset);
    if (d <= tol) {
      ++count;
      sq += d * d;
    }
  }
  return {count, count ? std::sqrt(sq / static_cast<double>(count)) : 0.0};
}

}  // namespace

std::string_view to_string(PlaneOrientation o) {
  switch (o) {
    case PlaneOrientation::Horizontal:
      return "horizontal";
    case PlaneOrientation::Vertical:
      return "vertical";
    case PlaneOrientation::Other:
      return "other";
  }
  return "other";
}

PlaneOrientation orientation_from_string(std::string_view s) {
  if (s == "horizontal") return PlaneOrientation::Horizontal;
  if (s == "vertical") return PlaneOrientation::Vertical;
  if (s == "other") return PlaneOrientation::Other;
  fail(ErrorCode::ParseError, "unknown plane orientation '" + std::string(s) + "'");
}

void PointMoments::add(const Vec3& p) {
  ++count;
  sum += p;
  outer += p * p.transpose();
}

PointMoments& PointMoments::operator+=(const PointMoments& other) {
  count += other.count;
  sum += other.sum;
  outer += other.outer;
  return *this;
}

Vec3 PointMoments::centroid() const { return count ? Vec3(sum / static_cast<double>(count)) : Vec3::Zero(); }

Mat3 PointMoments::covariance() const {
  if (count == 0) return Mat3::Zero();
  const Vec3 c = centroid();
  return outer / static_cast<double>(count) - c * c.transpose();
}

void RansacParams::validate() const {
  if (iterations < 1) fail(ErrorCode::InvalidParams, "ransac iterations must be >= 1");
  if (!(inlier_tol > 0.0)) fail(ErrorCode::InvalidParams, "ransac inlier_tol must be > 0");
  if (min_support < 3) fail(ErrorCode::InvalidParams, "ransac min_support must be >= 3");
}

void canonicalize_sign(PlaneModel& plane) {
  constexpr double kZero = 1e-12;
  bool flip = plane.offset < -kZero;
  if (std::abs(plane.offset) <= kZero) {
    Eigen::Index i = 0;
    plane.normal.cwiseAbs().maxCoeff(&i);
    flip = plane.normal(i) < 0.0;
  }
  if (flip) {
    plane.normal = -plane.normal;
    plane.offset = -plane.offset;
  }
  if (std::abs(plane.offset) <= kZero) plane.offset = 0.0;
}

PlaneModel plane_from_moments(const PointMoments& m) {
  Eigen::SelfAdjointEigenSolver<Mat3> eig(m.covariance());
  PlaneModel plane;
  plane.normal = eig.eigenvectors().col(0).normalized();
  plane.offset = plane.normal.dot(m.centroid());
  plane.inlier_count = m.count;
  plane.moments = m;
  canonicalize_sign(plane);
  return plane;
}

PlaneFit fit_plane_ransac_detailed(std::span<const Vec3> points, const RansacParams& params) {
  params.validate();
  if (points.size() < 3) fail(ErrorCode::TooFewPoints, "plane fit needs at least 3 points");

  PointMoments all;
  for (const Vec3& p : points) all.add(p);
  Eigen::SelfAdjointEigenSolver<Mat3> spread(all.covariance());
  const Vec3 ev = spread.eigenvalues();
  if (ev(2) <= 1e-18 || ev(1) <= 1e-12 * ev(2))
    fail(ErrorCode::DegenerateInput, "points are collinear or coincident");

  std::mt19937_64 rng(params.seed);
  std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
  std::optional<Hypothesis> best;
  std::size_t best_count = 0;
  double best_rms = 0.0;
  for (int it = 0; it < params.iterations; ++it) {
    const std::size_t a = pick(rng);
    std::size_t b = pick(rng);
    std::size_t c = pick(rng);
    if (a == b || b == c || a == c) continue;
    const Vec3 n = (points[b] - points[a]).cross(points[c] - points[a]);
    const double len = n.norm();
    if (len < 1e-12) continue;
    const Hypothesis h{n / len, n.dot(points[a]) / len};
    const auto [count, rms] = score(points, h, params.inlier_tol);
    if (!best || count > best_count || (count == best_count && rms < best_rms)) {
      best = h;
      best_count = count;
      best_rms = rms;
    }
  }
  if (!best) {
    // Every draw was degenerate; the whole set still spans a plane.
    const PlaneModel ls = plane_from_moments(all);
    best = Hypothesis{ls.normal, ls.offset};
    best_count = score(points, *best, params.inlier_tol).first;
  }
  if (best_count < params.min_support)
    fail(ErrorCode::InsufficientSupport, "best plane has " + std::to_string(best_count) +
                                             " inliers, need " + std::to_string(params.min_support));

  PlaneFit fit;
  PointMoments inl;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (std::abs(best->normal.dot(points[i]) - best->offset) <= params.inlier_tol) {
      fit.inliers.push_back(i);
      inl.add(points[i]);
    }
  }
  fit.model = plane_from_moments(inl);
  // A line of inliers leaves the refit normal undetermined; keep the sample.
  Eigen::SelfAdjointEigenSolver<Mat3> inl_spread(inl.covariance());
  if (inl_spread.eigenvalues()(1) <= 1e-12 * inl_spread.eigenvalues()(2)) {
    fit.model.normal = best->normal;
    fit.model.offset = best->offset;
    canonicalize_sign(fit.model);
  }
  return fit;
}

PlaneModel fit_plane_ransac(std::span<const Vec3> points, const RansacParams& params) {
  return fit_plane_ransac_detailed(points, params).model;
}

PlaneOrientation classify(const PlaneModel& plane, const Vec3& gravity, const PlaneThresholds& t) {
  const double c = std::abs(plane.normal.dot(gravity));
  if (c > cos_deg(t.horizontal_deg)) return PlaneOrientation::Horizontal;
  if (c < cos_deg(t.vertical_deg)) return PlaneOrientation::Vertical;
  return PlaneOrientation::Other;
}

const PlaneModel* PlaneSet::find(int id) const {
  for (const PlaneModel& p : planes)
    if (p.id == id) return &p;
  return nullptr;
}

bool same_surface(const PlaneModel& a, const PlaneModel& b, const PlaneThresholds& t) {
  const double dot = a.normal.dot(b.normal);
  if (std::abs(dot) < cos_deg(t.merge_angle_deg)) return false;
  const double b_offset = dot < 0.0 ? -b.offset : b.offset;
  return std::abs(a.offset - b_offset) <= t.merge_offset_m;
}

PlaneSet update_planes(PlaneSet state, std::span<const Vec3> points, const RansacParams& params) {
  constexpr int kMaxPlanesPerUpdate = 8;
  std::vector<Vec3> remaining(points.begin(), points.end());
  for (int round = 0; round < kMaxPlanesPerUpdate && remaining.size() >= params.min_support; ++round) {
    RansacParams p = params;
    p.seed = params.seed + static_cast<std::uint64_t>(round);
    PlaneFit fit;
    try {
      fit = fit_plane_ransac_detailed(remaining, p);
    } catch (const Error&) {
      break;
    }

    PlaneModel candidate = fit.model;
    auto match = std::find_if(state.planes.begin(), state.planes.end(), [&](const PlaneModel& existing) {
      return same_surface(existing, candidate, state.thresholds);
    });
    if (match != state.planes.end()) {
      PointMoments merged = match->moments;
      merged += candidate.moments;
      const int id = match->id;
      *match = plane_from_moments(merged);
      match->id = id;
      match->orientation = classify(*match, state.gravity, state.thresholds);
    } else {
      candidate.id = state.next_id++;
      candidate.orientation = classify(candidate, state.gravity, state.thresholds);
      state.planes.push_back(candidate);
    }

    std::vector<Vec3> rest;
    rest.reserve(remaining.size() - fit.inliers.size());
    std::size_t next = 0;
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      if (next < fit.inliers.size() && fit.inliers[next] == i) {
        ++next;
        continue;
      }
      rest.push_back(remaining[i]);
    }
    remaining = std::move(rest);
  }
  return state;
}

}  // namespace skyanchor
