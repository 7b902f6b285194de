#include "skyanchor/json_io.hpp"

#include <cmath>
#include <fstream>

#include "skyanchor/error.hpp"

namespace skyanchor {

using nlohmann::json;

namespace {

template <typename F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, std::string(what) + ": " + e.what());
  }
}

OrderedJson vec_to_json(const Eigen::Ref<const Eigen::VectorXd>& v) {
  OrderedJson a = OrderedJson::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

OrderedJson mat3_to_json(const Mat3& m) {
  OrderedJson rows = OrderedJson::array();
  for (int r = 0; r < 3; ++r) rows.push_back(vec_to_json(m.row(r).transpose()));
  return rows;
}

Mat3 mat3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) fail(ErrorCode::ParseError, "expected a 3x3 nested array");
  Mat3 m;
  for (int r = 0; r < 3; ++r) {
    const auto row = j.at(r).get<std::vector<double>>();
    if (row.size() != 3) fail(ErrorCode::ParseError, "expected a 3x3 nested array");
    for (int c = 0; c < 3; ++c) m(r, c) = row[c];
  }
  return m;
}

Vec3 vec3_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) fail(ErrorCode::ParseError, "expected a 3-vector");
  return {v[0], v[1], v[2]};
}

}  // namespace

OrderedJson pose_to_json(const Pose& p) {
  OrderedJson j;
  j["rotation"] = mat3_to_json(p.rotation);
  j["translation"] = vec_to_json(p.translation);
  return j;
}

Pose pose_from_json(const json& j) {
  return guarded("pose", [&] {
    Pose p;
    p.rotation = mat3_from_json(j.at("rotation"));
    p.translation = vec3_from_json(j.at("translation"));
    if (!p.rotation.allFinite() || !p.translation.allFinite()) fail(ErrorCode::ParseError, "pose is not finite");
    if ((p.rotation.transpose() * p.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6 ||
        p.rotation.determinant() < 0.0)
      fail(ErrorCode::ParseError, "pose rotation is not a rotation matrix");
    p.rotation = nearest_rotation(p.rotation);
    return p;
  });
}

OrderedJson intrinsics_to_json(const CameraIntrinsics& k) {
  return OrderedJson{{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx},
                     {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

CameraIntrinsics intrinsics_from_json(const json& j) {
  return guarded("intrinsics", [&] {
    CameraIntrinsics k;
    k.fx = j.at("fx").get<double>();
    k.fy = j.at("fy").get<double>();
    k.cx = j.at("cx").get<double>();
    k.cy = j.at("cy").get<double>();
    k.width = j.at("width").get<int>();
    k.height = j.at("height").get<int>();
    return k;
  });
}

OrderedJson detection_to_json(const TagDetection& d) {
  OrderedJson corners = OrderedJson::array();
  for (const Vec2& c : d.corners) corners.push_back({c.x(), c.y()});
  OrderedJson j;
  j["family"] = d.family;
  j["id"] = d.id;
  j["corners"] = corners;
  j["center"] = {d.center.x(), d.center.y()};
  j["homography"] = mat3_to_json(d.homography);
  j["hamming"] = d.hamming;
  j["decision_margin"] = d.decision_margin;
  return j;
}

OrderedJson detections_to_json(const std::vector<TagDetection>& ds) {
  OrderedJson a = OrderedJson::array();
  for (const auto& d : ds) a.push_back(detection_to_json(d));
  return a;
}

OrderedJson pose_estimate_to_json(const PoseEstimate& e) {
  OrderedJson j;
  j["pose"] = pose_to_json(e.pose);
  j["reprojection_rms"] = e.reprojection_rms;
  j["iterations"] = e.iterations;
  return j;
}

DetectorParams detector_params_from_json(const json& j) {
  return guarded("detector params", [&] {
    DetectorParams p;
    p.threshold_tile = j.value("threshold_tile", p.threshold_tile);
    p.min_contrast = j.value("min_contrast", p.min_contrast);
    p.quad_min_area = j.value("quad_min_area", p.quad_min_area);
    p.quad_max_cos = j.value("quad_max_cos", p.quad_max_cos);
    p.max_hamming = j.value("max_hamming", p.max_hamming);
    p.refine_corners = j.value("refine_corners", p.refine_corners);
    return p;
  });
}

OrderedJson detector_params_to_json(const DetectorParams& p) {
  OrderedJson j;
  j["threshold_tile"] = p.threshold_tile;
  j["min_contrast"] = p.min_contrast;
  j["quad_min_area"] = p.quad_min_area;
  j["quad_max_cos"] = p.quad_max_cos;
  j["max_hamming"] = p.max_hamming;
  j["refine_corners"] = p.refine_corners;
  return j;
}

OrderedJson plane_to_json(const PlaneModel& p) {
  OrderedJson j;
  j["id"] = p.id;
  j["normal"] = vec_to_json(p.normal);
  j["offset"] = p.offset;
  j["inlier_count"] = p.inlier_count;
  j["orientation"] = std::string(to_string(p.orientation));
  return j;
}

OrderedJson plane_set_to_json(const PlaneSet& s) {
  OrderedJson planes = OrderedJson::array();
  for (const auto& p : s.planes) planes.push_back(plane_to_json(p));
  OrderedJson j;
  j["gravity"] = vec_to_json(s.gravity);
  j["planes"] = planes;
  return j;
}

PlaneModel plane_from_json(const json& j) {
  return guarded("plane", [&] {
    PlaneModel p;
    p.normal = vec3_from_json(j.at("normal"));
    if (std::abs(p.normal.norm() - 1.0) > 1e-6) fail(ErrorCode::ParseError, "plane normal is not unit length");
    p.normal.normalize();
    p.offset = j.at("offset").get<double>();
    p.id = j.value("id", 1);
    p.inlier_count = j.value("inlier_count", std::size_t{0});
    if (j.contains("orientation")) p.orientation = orientation_from_string(j.at("orientation").get<std::string>());
    return p;
  });
}

OrderedJson anchor_to_json(const WorldAnchor& a) {
  OrderedJson j;
  j["pose"] = pose_to_json(a.pose);
  if (a.snapped_plane)
    j["snapped_plane"] = *a.snapped_plane;
  else
    j["snapped_plane"] = nullptr;
  j["snapped"] = a.snapped;
  j["last_tag_observation"] = a.last_tag_observation;
  j["observation_count"] = a.observation_count;
  return j;
}

FusionParams fusion_params_from_json(const json& j) {
  return guarded("fusion params", [&] {
    FusionParams p;
    p.snap_threshold = j.value("snap_threshold", p.snap_threshold);
    p.smoothing_alpha = j.value("smoothing_alpha", p.smoothing_alpha);
    p.outlier_gate_translation = j.value("outlier_gate_translation", p.outlier_gate_translation);
    p.outlier_gate_rotation = j.value("outlier_gate_rotation", p.outlier_gate_rotation);
    p.validate();
    return p;
  });
}

OrderedJson color_to_json(const Color& c) { return OrderedJson{{"r", c.r}, {"g", c.g}, {"b", c.b}}; }

OrderedJson scene_to_json(const SceneSpec& s) {
  OrderedJson j;
  j["city"] = s.city;
  j["metric"] = std::string(to_string(s.metric));
  j["sphere_color"] = color_to_json(s.sphere_color);
  j["particle_density"] = s.particle_density;
  j["convection_intensity"] = s.convection_intensity;
  j["pin_label"] = s.pin_label;
  j["timestamp"] = s.timestamp;
  return j;
}

SceneSpec scene_from_json(const json& j) {
  return guarded("scene spec", [&] {
    SceneSpec s;
    s.city = j.at("city").get<std::string>();
    s.metric = metric_from_string(j.at("metric").get<std::string>());
    const auto& c = j.at("sphere_color");
    s.sphere_color = {c.at("r").get<double>(), c.at("g").get<double>(), c.at("b").get<double>()};
    s.particle_density = j.at("particle_density").get<double>();
    s.convection_intensity = j.at("convection_intensity").get<double>();
    s.pin_label = j.at("pin_label").get<std::string>();
    s.timestamp = j.at("timestamp").get<std::int64_t>();
    return s;
  });
}

SceneFile scene_file_from_json(const json& j) {
  return guarded("scene file", [&] {
    SceneFile f;
    f.scene.model_pose_world = pose_from_json(j.at("model_pose"));
    f.scene.plane = plane_from_json(j.at("plane"));
    for (const auto& t : j.at("tags")) {
      TagPlacement tp;
      tp.id = t.at("id").get<int>();
      tp.tag_in_model = t.contains("pose") ? pose_from_json(t.at("pose")) : Pose::identity();
      f.scene.tags.push_back(tp);
    }
    if (f.scene.tags.empty()) fail(ErrorCode::ParseError, "scene file lists no tags");
    if (j.contains("fusion")) f.fusion = fusion_params_from_json(j.at("fusion"));
    if (j.contains("simulation")) {
      const auto& s = j.at("simulation");
      SimulationOptions& o = f.simulation;
      const std::string source = s.value("source", std::string("analytic"));
      if (source == "analytic")
        o.source = TagPoseSource::Analytic;
      else if (source == "rendered")
        o.source = TagPoseSource::Rendered;
      else
        fail(ErrorCode::ParseError, "unknown simulation source '" + source + "'");
      o.translation_noise = s.value("translation_noise", o.translation_noise);
      o.rotation_noise_deg = s.value("rotation_noise_deg", o.rotation_noise_deg);
      o.pixel_noise = s.value("pixel_noise", o.pixel_noise);
      o.seed = s.value("seed", o.seed);
      o.frame_interval = s.value("frame_interval", o.frame_interval);
      o.tag_size = s.value("tag_size", o.tag_size);
      if (s.contains("intrinsics")) o.intrinsics = intrinsics_from_json(s.at("intrinsics"));
    }
    return f;
  });
}

std::vector<TrajectoryFrame> trajectory_from_json(const json& j) {
  return guarded("trajectory", [&] {
    std::vector<TrajectoryFrame> out;
    for (const auto& f : j.at("frames")) {
      TrajectoryFrame tf;
      tf.camera_pose_world = pose_from_json(f.at("camera_pose"));
      tf.tag_visible = f.value("tag_visible", true);
      out.push_back(tf);
    }
    return out;
  });
}

OrderedJson trajectory_to_json(const std::vector<TrajectoryFrame>& frames) {
  OrderedJson a = OrderedJson::array();
  for (const auto& f : frames) {
    OrderedJson e;
    e["camera_pose"] = pose_to_json(f.camera_pose_world);
    e["tag_visible"] = f.tag_visible;
    a.push_back(e);
  }
  return OrderedJson{{"frames", a}};
}

OrderedJson drift_summary_to_json(const DriftReport& r) {
  OrderedJson j;
  j["mode"] = std::string(to_string(r.mode));
  j["frames"] = r.frames.size();
  j["lost_frames"] = r.lost_frames;
  const bool any = r.lost_frames < static_cast<int>(r.frames.size());
  auto num_or_null = [&](double v) { return any ? OrderedJson(v) : OrderedJson(nullptr); };
  j["max_err_t_m"] = num_or_null(r.max_err_t_m);
  j["max_err_r_deg"] = num_or_null(r.max_err_r_deg);
  j["mean_err_t_m"] = num_or_null(r.mean_err_t_m);
  j["mean_err_r_deg"] = num_or_null(r.mean_err_r_deg);
  if (!r.frames.empty() && !r.frames.back().lost)
    j["final_anchor"] = pose_to_json(r.frames.back().anchor);
  else
    j["final_anchor"] = nullptr;
  return j;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

}  // namespace skyanchor
