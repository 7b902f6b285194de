#include <doctest.h>

#include <random>

#include "skyanchor/error.hpp"
#include "skyanchor/json_io.hpp"
#include "support/fs.hpp"
#include "support/scenes.hpp"

using namespace skyanchor;
using namespace skyanchor::testing;

TEST_CASE("pose json round trip") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    Pose p;
    p.rotation = exp_so3(Vec3(n(rng), n(rng), n(rng)));
    p.translation = Vec3(n(rng), n(rng), n(rng));
    const Pose q = pose_from_json(nlohmann::json::parse(pose_to_json(p).dump()));
    CHECK((q.matrix() - p.matrix()).cwiseAbs().maxCoeff() < 1e-14);
  }
  CHECK_THROWS_AS(pose_from_json(nlohmann::json::parse(R"({"rotation":[[2,0,0],[0,1,0],[0,0,1]],"translation":[0,0,0]})")),
                  Error);
  CHECK_THROWS_AS(pose_from_json(nlohmann::json::parse(R"({"rotation":[[1,0],[0,1]],"translation":[0,0,0]})")), Error);
  CHECK_THROWS_AS(pose_from_json(nlohmann::json::parse(R"({"translation":[0,0,0]})")), Error);
}

TEST_CASE("detection json fields") {
  TagDetection d;
  d.family = "tagStandard41h12";
  d.id = 7;
  d.corners = {Vec2(1, 2), Vec2(3, 4), Vec2(5, 6), Vec2(7, 8)};
  d.center = Vec2(4, 5);
  d.hamming = 1;
  d.decision_margin = 88.5;
  const auto j = detection_to_json(d);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"family", "id", "corners", "center", "homography", "hamming",
                                         "decision_margin"});
  CHECK(j["corners"].dump() == "[[1.0,2.0],[3.0,4.0],[5.0,6.0],[7.0,8.0]]");
  CHECK(j["homography"].size() == 3);
}

TEST_CASE("scene spec json round trip") {
  const SceneSpec s{"Hsinchu City", Metric::PM25, {0.1, 0.2, 0.3}, 0.3, 0.0, "Hsinchu City: 42.0 AQI", 99};
  const auto j = scene_to_json(s);
  CHECK(j.dump() ==
        R"({"city":"Hsinchu City","metric":"pm25","sphere_color":{"r":0.1,"g":0.2,"b":0.3},"particle_density":0.3,"convection_intensity":0.0,"pin_label":"Hsinchu City: 42.0 AQI","timestamp":99})");
  CHECK(scene_from_json(nlohmann::json::parse(j.dump())) == s);
}

TEST_CASE("anchor and plane json") {
  WorldAnchor a;
  a.pose.translation = Vec3(1, 2, 3);
  a.snapped_plane = 4;
  a.snapped = true;
  a.observation_count = 9;
  const auto j = anchor_to_json(a);
  CHECK(j["snapped_plane"] == 4);
  CHECK(j["snapped"] == true);
  a.snapped_plane.reset();
  CHECK(anchor_to_json(a)["snapped_plane"].is_null());

  PlaneSet set;
  PlaneModel p;
  p.id = 3;
  p.normal = Vec3(0, 1, 0);
  p.offset = 0.5;
  p.inlier_count = 40;
  p.orientation = PlaneOrientation::Vertical;
  set.planes.push_back(p);
  const auto sj = plane_set_to_json(set);
  CHECK(sj["planes"][0]["orientation"] == "vertical");
  const PlaneModel back = plane_from_json(sj["planes"][0]);
  CHECK(back.id == 3);
  CHECK(back.normal == p.normal);
  CHECK(back.orientation == PlaneOrientation::Vertical);
}

TEST_CASE("shipped scene and trajectory files") {
  const SceneFile sf = scene_file_from_json(read_json_file(kData / "scenes" / "desk_scene.json"));
  CHECK(sf.scene.tags.size() == 1);
  const auto occl = trajectory_from_json(read_json_file(kData / "scenes" / "occlusion_trajectory.json"));
  CHECK(occl.size() == 151);
  int hidden = 0;
  for (std::size_t i = 0; i < occl.size(); ++i) {
    if (!occl[i].tag_visible) {
      ++hidden;
      CHECK(i >= 50);
      CHECK(i <= 100);
    }
  }
  CHECK(hidden == 51);
  CHECK(trajectory_from_json(nlohmann::json::parse(trajectory_to_json(occl).dump())).size() == 151);
  CHECK_THROWS_AS(read_json_file("/nonexistent.json"), Error);
  CHECK_THROWS_AS(read_json_file(write_temp("broken.json", "{")), Error);
}

TEST_CASE("detector params json") {
  const DetectorParams p = detector_params_from_json(read_json_file(kData / "config" / "detector.json"));
  const DetectorParams d;
  CHECK(p.threshold_tile == d.threshold_tile);
  CHECK(p.quad_max_cos == d.quad_max_cos);
  CHECK(p.max_hamming == d.max_hamming);
  CHECK(detector_params_from_json(detector_params_to_json(p)).min_contrast == p.min_contrast);
  const CameraIntrinsics k = intrinsics_from_json(read_json_file(kData / "config" / "intrinsics.json"));
  CHECK(k.fx == desk_camera().fx);
  CHECK(k.width == 640);
}
