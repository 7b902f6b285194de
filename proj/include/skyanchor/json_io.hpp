#pragma once

// JSON forms of the domain types. Poses are {"rotation": 3x3 row-major
// nested array, "translation": [x, y, z]}.

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "skyanchor/anchor_fusion.hpp"
#include "skyanchor/detector.hpp"
#include "skyanchor/plane_detector.hpp"
#include "skyanchor/pose_estimator.hpp"
#include "skyanchor/viz_mapper.hpp"

namespace skyanchor {

using OrderedJson = nlohmann::ordered_json;

OrderedJson pose_to_json(const Pose& p);
/// Re-orthonormalizes the rotation; throws ParseError if it is far from a
/// rotation.
Pose pose_from_json(const nlohmann::json& j);

OrderedJson intrinsics_to_json(const CameraIntrinsics& k);
CameraIntrinsics intrinsics_from_json(const nlohmann::json& j);

OrderedJson detection_to_json(const TagDetection& d);
OrderedJson detections_to_json(const std::vector<TagDetection>& ds);
OrderedJson pose_estimate_to_json(const PoseEstimate& e);

DetectorParams detector_params_from_json(const nlohmann::json& j);
OrderedJson detector_params_to_json(const DetectorParams& p);

OrderedJson plane_to_json(const PlaneModel& p);
OrderedJson plane_set_to_json(const PlaneSet& s);
/// Moments are rebuilt as empty; merged planes refit from new samples only.
PlaneModel plane_from_json(const nlohmann::json& j);

OrderedJson anchor_to_json(const WorldAnchor& a);
FusionParams fusion_params_from_json(const nlohmann::json& j);

OrderedJson color_to_json(const Color& c);
OrderedJson scene_to_json(const SceneSpec& s);
SceneSpec scene_from_json(const nlohmann::json& j);

/// Scene file: {"model_pose": pose, "plane": {normal, offset}, "tags":
/// [{"id", "pose"}], optional "fusion" params, optional "simulation"
/// options}.
struct SceneFile {
  SimulationScene scene;
  FusionParams fusion;
  SimulationOptions simulation;
};
SceneFile scene_file_from_json(const nlohmann::json& j);

/// Trajectory file: {"frames": [{"camera_pose": pose, "tag_visible": bool}]}.
std::vector<TrajectoryFrame> trajectory_from_json(const nlohmann::json& j);
OrderedJson trajectory_to_json(const std::vector<TrajectoryFrame>& frames);

OrderedJson drift_summary_to_json(const DriftReport& r);

/// Reads and parses a JSON file; throws IoError or ParseError.
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace skyanchor
