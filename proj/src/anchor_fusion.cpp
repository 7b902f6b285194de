#include "skyanchor/anchor_fusion.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "skyanchor/detector.hpp"
#include "skyanchor/error.hpp"
#include "skyanchor/pose_estimator.hpp"
#include "skyanchor/render.hpp"

namespace skyanchor {

void FusionParams::validate() const {
  if (!(smoothing_alpha > 0.0 && smoothing_alpha <= 1.0))
    fail(ErrorCode::InvalidParams, "smoothing_alpha must be in (0, 1]");
  if (!(snap_threshold >= 0.0)) fail(ErrorCode::InvalidParams, "snap_threshold must be >= 0");
  if (!(outlier_gate_translation > 0.0) || !(outlier_gate_rotation > 0.0))
    fail(ErrorCode::InvalidParams, "outlier gates must be positive");
}

Pose observed_model_pose(const TagObservation& obs) {
  const Pose tag_world = compose(obs.camera_pose_world, obs.tag_pose_cam);
  return compose(tag_world, invert(obs.tag_in_model));
}

std::optional<int> snap_to_planes(Pose& pose, const PlaneSet& planes, const FusionParams& params) {
  const PlaneModel* nearest = nullptr;
  double best = std::numeric_limits<double>::infinity();
  for (const PlaneModel& plane : planes.planes) {
    const double d = std::abs(plane.signed_distance(pose.translation));
    if (d <= params.snap_threshold && d < best) {
      best = d;
      nearest = &plane;
    }
  }
  if (!nearest) return std::nullopt;

  const Vec3 z = pose.rotation.col(2);
  const Vec3 target = z.dot(nearest->normal) >= 0.0 ? nearest->normal : Vec3(-nearest->normal);
  pose.rotation = rotation_between(z, target) * pose.rotation;
  pose.translation = nearest->project(pose.translation);
  return nearest->id;
}

namespace {

WorldAnchor place(const Pose& raw, const PlaneSet& planes, const FusionParams& params) {
  WorldAnchor a;
  a.pose = raw;
  a.snapped_plane = snap_to_planes(a.pose, planes, params);
  a.snapped = a.snapped_plane.has_value();
  return a;
}

}  // namespace

WorldAnchor create_anchor(const TagObservation& obs, const PlaneSet& planes, const FusionParams& params) {
  params.validate();
  WorldAnchor a = place(observed_model_pose(obs), planes, params);
  a.last_tag_observation = obs.timestamp;
  a.observation_count = 1;
  return a;
}

WorldAnchor update_anchor(const WorldAnchor& anchor, const std::optional<TagObservation>& obs,
                          const PlaneSet& planes, const FusionParams& params) {
  if (!obs) return anchor;
  params.validate();

  const WorldAnchor candidate = place(observed_model_pose(*obs), planes, params);
  if ((candidate.pose.translation - anchor.pose.translation).norm() > params.outlier_gate_translation ||
      rotation_distance_deg(candidate.pose.rotation, anchor.pose.rotation) > params.outlier_gate_rotation)
    return anchor;

  Pose blended;
  blended.translation =
      anchor.pose.translation + params.smoothing_alpha * (candidate.pose.translation - anchor.pose.translation);
  blended.rotation = slerp(anchor.pose.rotation, candidate.pose.rotation, params.smoothing_alpha);

  WorldAnchor out = place(blended, planes, params);
  out.last_tag_observation = obs->timestamp;
  out.observation_count = anchor.observation_count + 1;
  return out;
}

bool snap_invariant_holds(const WorldAnchor& anchor, const PlaneSet& planes) {
  if (!anchor.snapped) return true;
  if (!anchor.snapped_plane) return false;
  const PlaneModel* plane = planes.find(*anchor.snapped_plane);
  if (!plane) return false;
  if (std::abs(plane->signed_distance(anchor.pose.translation)) > 1e-6) return false;
  const Vec3 z = anchor.pose.rotation.col(2);
  return std::min((z - plane->normal).norm(), (z + plane->normal).norm()) <= 1e-6;
}

// ---------------------------------------------------------------------------
// Drift simulation

std::string_view to_string(FusionMode m) { return m == FusionMode::Fused ? "fused" : "marker_only"; }

FusionMode fusion_mode_from_string(std::string_view s) {
  if (s == "fused") return FusionMode::Fused;
  if (s == "marker_only") return FusionMode::MarkerOnly;
  fail(ErrorCode::ParseError, "unknown fusion mode '" + std::string(s) + "'");
}

std::string DriftReport::to_csv() const {
  std::ostringstream out;
  out << "frame,mode,visible,err_t_m,err_r_deg,lost\n";
  char buf[64];
  for (const DriftFrame& f : frames) {
    out << f.frame << ',' << to_string(f.mode) << ',' << (f.visible ? 1 : 0) << ',';
    if (f.lost) {
      out << "nan,nan";
    } else {
      std::snprintf(buf, sizeof buf, "%.9g,%.9g", f.err_t_m, f.err_r_deg);
      out << buf;
    }
    out << ',' << (f.lost ? 1 : 0) << '\n';
  }
  return out.str();
}

namespace {

std::optional<Pose> rendered_tag_pose(const TagPlacement& tag, const Pose& truth, const SimulationOptions& opt,
                                      int frame) {
  if (!opt.family) fail(ErrorCode::InvalidParams, "rendered tag source needs a family");
  RenderOptions ro;
  ro.noise_seed = opt.seed + static_cast<std::uint64_t>(frame);
  GrayImage img;
  try {
    img = render_tag(*opt.family, tag.id, truth, opt.intrinsics, opt.tag_size, opt.pixel_noise, ro);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::TagOutsideFrustum) return std::nullopt;
    throw;
  }
  for (const TagDetection& det : detect(img, *opt.family)) {
    if (det.id != tag.id) continue;
    try {
      return estimate(det, opt.intrinsics, opt.tag_size).pose;
    } catch (const Error&) {
      return std::nullopt;
    }
  }
  return std::nullopt;
}

}  // namespace

DriftReport simulate_trajectory(const SimulationScene& scene, const std::vector<TrajectoryFrame>& trajectory,
                                FusionMode mode, const FusionParams& params, const SimulationOptions& options) {
  if (trajectory.empty()) fail(ErrorCode::EmptyTrajectory, "trajectory has no frames");
  if (scene.tags.empty()) fail(ErrorCode::InvalidParams, "scene has no tags");
  params.validate();

  PlaneSet planes;
  planes.planes.push_back(scene.plane);
  if (planes.planes[0].id == 0) planes.planes[0].id = 1;
  planes.next_id = planes.planes[0].id + 1;

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const TagPlacement& tag = scene.tags.front();

  DriftReport report;
  report.mode = mode;
  std::optional<WorldAnchor> anchor;
  double sum_t = 0.0, sum_r = 0.0;
  int counted = 0;

  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    const TrajectoryFrame& tf = trajectory[i];
    const int frame = static_cast<int>(i);
    std::optional<TagObservation> obs;
    if (tf.tag_visible) {
      const Pose truth = compose(invert(tf.camera_pose_world), compose(scene.model_pose_world, tag.tag_in_model));
      std::optional<Pose> seen;
      if (options.source == TagPoseSource::Analytic) {
        Pose p = truth;
        const double rs = options.rotation_noise_deg * std::numbers::pi / 180.0;
        const Vec3 w(gauss(rng) * rs, gauss(rng) * rs, gauss(rng) * rs);
        const Vec3 dt(gauss(rng), gauss(rng), gauss(rng));
        p.rotation = exp_so3(w) * p.rotation;
        p.translation += options.translation_noise * dt;
        seen = p;
      } else {
        seen = rendered_tag_pose(tag, truth, options, frame);
      }
      if (seen) obs = TagObservation{*seen, tf.camera_pose_world, options.frame_interval * frame, tag.tag_in_model};
    }

    DriftFrame df;
    df.frame = frame;
    df.mode = mode;
    df.visible = obs.has_value();
    if (mode == FusionMode::MarkerOnly) {
      if (obs) {
        WorldAnchor raw;
        raw.pose = observed_model_pose(*obs);
        anchor = raw;
      } else {
        anchor.reset();
      }
    } else if (!anchor) {
      if (obs) anchor = create_anchor(*obs, planes, params);
    } else {
      anchor = update_anchor(*anchor, obs, planes, params);
    }

    df.lost = !anchor.has_value();
    if (anchor) {
      df.anchor = anchor->pose;
      df.snapped = anchor->snapped;
      df.err_t_m = (anchor->pose.translation - scene.model_pose_world.translation).norm();
      df.err_r_deg = rotation_distance_deg(anchor->pose.rotation, scene.model_pose_world.rotation);
      report.max_err_t_m = std::max(report.max_err_t_m, df.err_t_m);
      report.max_err_r_deg = std::max(report.max_err_r_deg, df.err_r_deg);
      sum_t += df.err_t_m;
      sum_r += df.err_r_deg;
      ++counted;
    } else {
      ++report.lost_frames;
    }
    report.frames.push_back(df);
  }
  if (counted > 0) {
    report.mean_err_t_m = sum_t / counted;
    report.mean_err_r_deg = sum_r / counted;
  }
  return report;
}

std::vector<TrajectoryFrame> orbit_trajectory(const SimulationScene& scene, int frames, double radius,
                                              double height, double sweep_deg, int hidden_begin,
                                              int hidden_end) {
  std::vector<TrajectoryFrame> out;
  const Vec3 target = scene.model_pose_world.translation;
  for (int i = 0; i < frames; ++i) {
    const double frac = frames > 1 ? static_cast<double>(i) / (frames - 1) : 0.5;
    const double theta = (frac - 0.5) * sweep_deg * std::numbers::pi / 180.0;
    const Vec3 pos = target + Vec3(radius * std::cos(theta), radius * std::sin(theta), height);
    const Vec3 z = (target - pos).normalized();
    const Vec3 down(0.0, 0.0, -1.0);
    const Vec3 y = (down - down.dot(z) * z).normalized();
    const Vec3 x = y.cross(z);
    TrajectoryFrame f;
    f.camera_pose_world.rotation.col(0) = x;
    f.camera_pose_world.rotation.col(1) = y;
    f.camera_pose_world.rotation.col(2) = z;
    f.camera_pose_world.translation = pos;
    f.tag_visible = i < hidden_begin || i > hidden_end;
    out.push_back(f);
  }
  return out;
}

}  // namespace skyanchor
