#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "skyanchor/geometry.hpp"
#include "skyanchor/plane_detector.hpp"
#include "skyanchor/tag_family.hpp"

namespace skyanchor {

struct FusionParams {
  double snap_threshold = 0.02;  ///< meters
  double smoothing_alpha = 0.2;
  double outlier_gate_translation = 0.10;  ///< meters
  double outlier_gate_rotation = 15.0;     ///< degrees

  void validate() const;
};

/// One sighting of a tag. `tag_in_model` places the tag in the model frame
/// (tag -> model); identity puts the model origin on the tag.
struct TagObservation {
  Pose tag_pose_cam;       ///< tag -> camera
  Pose camera_pose_world;  ///< camera -> world
  double timestamp = 0.0;  ///< seconds
  Pose tag_in_model;
};

struct WorldAnchor {
  Pose pose;  ///< model -> world
  std::optional<int> snapped_plane;
  bool snapped = false;
  double last_tag_observation = 0.0;
  std::size_t observation_count = 0;
};

/// Model pose in the world implied by a single observation, before snapping.
Pose observed_model_pose(const TagObservation& obs);

/// Moves `pose` onto the nearest plane within the snap threshold: the origin
/// is projected onto the plane and the frame is turned by the smallest
/// rotation that lines its +z axis up with the plane normal (either sign).
/// Returns the plane id when a snap happened.
std::optional<int> snap_to_planes(Pose& pose, const PlaneSet& planes, const FusionParams& params);

WorldAnchor create_anchor(const TagObservation& obs, const PlaneSet& planes, const FusionParams& params);

/// No observation returns the anchor untouched. Observations outside the
/// outlier gates are dropped; accepted ones are blended in and re-snapped.
WorldAnchor update_anchor(const WorldAnchor& anchor, const std::optional<TagObservation>& obs,
                          const PlaneSet& planes, const FusionParams& params);

/// Origin on the snapped plane within 1e-6 m and +z parallel to its normal
/// within 1e-6. Always true for an unsnapped anchor.
bool snap_invariant_holds(const WorldAnchor& anchor, const PlaneSet& planes);

// ---------------------------------------------------------------------------
// Drift simulation

enum class FusionMode { MarkerOnly, Fused };

std::string_view to_string(FusionMode m);
FusionMode fusion_mode_from_string(std::string_view s);

struct TagPlacement {
  int id = 0;
  Pose tag_in_model;  ///< tag -> model
};

struct SimulationScene {
  Pose model_pose_world;  ///< ground truth, model -> world
  std::vector<TagPlacement> tags;
  PlaneModel plane;  ///< the surface the model rests on
};

struct TrajectoryFrame {
  Pose camera_pose_world;
  bool tag_visible = true;
};

/// Where per-frame tag poses come from: the true pose with Gaussian
/// perturbation, or a render of the tag run through detection and pose
/// estimation.
enum class TagPoseSource { Analytic, Rendered };

struct SimulationOptions {
  TagPoseSource source = TagPoseSource::Analytic;
  double translation_noise = 0.0;  ///< meters, per axis (analytic)
  double rotation_noise_deg = 0.0;  ///< per axis (analytic)
  double pixel_noise = 0.0;         ///< gray levels (rendered)
  std::uint64_t seed = 1;
  double frame_interval = 1.0 / 30.0;  ///< seconds
  // Rendered source only.
  const TagFamily* family = nullptr;
  CameraIntrinsics intrinsics;
  double tag_size = 0.1;
};

struct DriftFrame {
  int frame = 0;
  FusionMode mode = FusionMode::Fused;
  bool visible = false;  ///< a tag pose was available this frame
  bool lost = false;     ///< no anchor to report
  double err_t_m = 0.0;  ///< meaningless when lost
  double err_r_deg = 0.0;
  bool snapped = false;
  Pose anchor;  ///< meaningless when lost
};

struct DriftReport {
  FusionMode mode = FusionMode::Fused;
  std::vector<DriftFrame> frames;
  int lost_frames = 0;
  double max_err_t_m = 0.0;  ///< over frames that are not lost
  double max_err_r_deg = 0.0;
  double mean_err_t_m = 0.0;
  double mean_err_r_deg = 0.0;

  /// One row per frame: frame,mode,visible,err_t_m,err_r_deg,lost. Lost
  /// frames carry nan errors.
  std::string to_csv() const;
};

DriftReport simulate_trajectory(const SimulationScene& scene, const std::vector<TrajectoryFrame>& trajectory,
                                FusionMode mode, const FusionParams& params,
                                const SimulationOptions& options = {});

/// Camera sweeping an arc above the scene, always looking at the model
/// origin; tag hidden on frames [hidden_begin, hidden_end].
std::vector<TrajectoryFrame> orbit_trajectory(const SimulationScene& scene, int frames, double radius,
                                              double height, double sweep_deg, int hidden_begin,
                                              int hidden_end);

}  // namespace skyanchor
