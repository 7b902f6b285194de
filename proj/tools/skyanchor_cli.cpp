#include <csignal>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <thread>

#include <pthread.h>
#include <time.h>

#include <CLI11.hpp>

#include "skyanchor/api_service.hpp"
#include "skyanchor/detector.hpp"
#include "skyanchor/error.hpp"
#include "skyanchor/json_io.hpp"
#include "skyanchor/log.hpp"
#include "skyanchor/pose_estimator.hpp"
#include "skyanchor/render.hpp"
#include "skyanchor/weather_net.hpp"

using namespace skyanchor;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kNothingFound = 2;

const std::string kDefaultFamily = std::string(SKYANCHOR_DATA_DIR) + "/families/tagStandard41h12.txt";
const std::string kDefaultIntrinsics = std::string(SKYANCHOR_DATA_DIR) + "/config/intrinsics.json";

DetectorParams load_params(const std::string& path, const TagFamily& family) {
  DetectorParams p = path.empty() ? DetectorParams{} : detector_params_from_json(read_json_file(path));
  p.validate(family);
  return p;
}

Mat3 euler_deg(double roll, double pitch, double yaw) {
  const double k = std::numbers::pi / 180.0;
  return (Eigen::AngleAxisd(yaw * k, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch * k, Vec3::UnitY()) *
          Eigen::AngleAxisd(roll * k, Vec3::UnitX()))
      .toRotationMatrix();
}

// Blocks SIGINT/SIGTERM for every thread started after this call; the
// returned thread waits for them and runs `on_signal` once.
std::jthread signal_watcher(std::function<void()> on_signal) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  return std::jthread([set, on_signal = std::move(on_signal)](std::stop_token st) {
    const timespec tick{0, 100'000'000};
    while (!st.stop_requested()) {
      if (sigtimedwait(&set, nullptr, &tick) > 0) {
        logger()->info("signal received, shutting down");
        on_signal();
        return;
      }
    }
  });
}

int cmd_detect(const std::string& image, const std::string& family_path, const std::string& params_path) {
  const TagFamily family = TagFamily::load(family_path);
  const DetectorParams params = load_params(params_path, family);
  const auto dets = detect(read_pgm(image), family, params);
  std::cout << detections_to_json(dets).dump(2) << "\n";
  return kOk;
}

int cmd_pose(const std::string& image, const std::string& family_path, const std::string& params_path,
             const std::string& intrinsics_path, double tag_size) {
  if (!(tag_size > 0.0)) fail(ErrorCode::NonPositiveTagSize, "--tag-size must be positive");
  const CameraIntrinsics k = intrinsics_from_json(read_json_file(intrinsics_path));
  k.validate();
  const TagFamily family = TagFamily::load(family_path);
  const auto dets = detect(read_pgm(image), family, load_params(params_path, family));
  OrderedJson out = OrderedJson::array();
  for (const auto& d : dets) {
    try {
      const PoseEstimate e = estimate(d, k, tag_size);
      OrderedJson j;
      j["id"] = d.id;
      j["pose"] = pose_to_json(e.pose);
      j["reprojection_rms"] = e.reprojection_rms;
      j["iterations"] = e.iterations;
      out.push_back(j);
    } catch (const Error& e) {
      logger()->warn("tag {}: {}", d.id, e.what());
    }
  }
  std::cout << out.dump(2) << "\n";
  if (out.empty()) {
    logger()->warn("no tag found");
    return kNothingFound;
  }
  return kOk;
}

int cmd_simulate(const std::string& scene_path, const std::string& trajectory_path, const std::string& mode,
                 const std::string& summary_path) {
  const SceneFile sf = scene_file_from_json(read_json_file(scene_path));
  const auto frames = trajectory_from_json(read_json_file(trajectory_path));
  std::vector<FusionMode> modes;
  if (mode == "both")
    modes = {FusionMode::MarkerOnly, FusionMode::Fused};
  else
    modes = {fusion_mode_from_string(mode)};

  OrderedJson summaries = OrderedJson::array();
  bool header = true;
  for (FusionMode m : modes) {
    const DriftReport r = simulate_trajectory(sf.scene, frames, m, sf.fusion, sf.simulation);
    std::string csv = r.to_csv();
    if (!header) csv.erase(0, csv.find('\n') + 1);
    header = false;
    std::cout << csv;
    summaries.push_back(drift_summary_to_json(r));
    logger()->info("mode={} frames={} lost={} max_err_t_m={:.6f} max_err_r_deg={:.4f}", to_string(m),
                   r.frames.size(), r.lost_frames, r.max_err_t_m, r.max_err_r_deg);
  }
  if (!summary_path.empty()) {
    std::ofstream out(summary_path);
    if (!out) fail(ErrorCode::IoError, "cannot write " + summary_path);
    out << summaries.dump(2) << "\n";
  }
  return kOk;
}

int cmd_serve(const std::string& config_path, int port_override, bool poll) {
  ServiceConfig cfg = ServiceConfig::load(config_path);
  if (port_override >= 0) cfg.port = port_override;
  ApiService service(cfg);
  service.bind();
  auto watcher = signal_watcher([&] { service.stop(); });
  service.run(poll);
  return kOk;
}

int cmd_mock(const std::string& host, int port, const std::string& cwb, const std::string& epa) {
  auto mock = MockWeatherServer::from_files(cwb, epa);
  const int bound = mock->bind(host, port);
  logger()->info("mock weather on http://{}:{}", host, bound);
  auto watcher = signal_watcher([&] { mock->stop(); });
  mock->run();
  return kOk;
}

struct RenderArgs {
  std::string family = kDefaultFamily;
  std::string intrinsics = kDefaultIntrinsics;
  std::string out;
  int id = 0;
  double tag_size = 0.1;
  double distance = 0.5;
  double tx = 0.0, ty = 0.0;
  double roll = 0.0, pitch = 0.0, yaw = 0.0;
  double noise = 0.0;
  std::uint64_t seed = 1;
};

int cmd_render(const RenderArgs& a) {
  const TagFamily family = TagFamily::load(a.family);
  const CameraIntrinsics k = intrinsics_from_json(read_json_file(a.intrinsics));
  Pose pose;
  pose.rotation = euler_deg(a.roll, a.pitch, a.yaw);
  pose.translation = Vec3(a.tx, a.ty, a.distance);
  RenderOptions opts;
  opts.noise_seed = a.seed;
  write_pgm(a.out, render_tag(family, a.id, pose, k, a.tag_size, a.noise, opts));
  OrderedJson corners = OrderedJson::array();
  for (const Vec3& c : tag_corner_points(a.tag_size)) {
    const Vec2 px = project(k, pose, c);
    corners.push_back({px.x(), px.y()});
  }
  OrderedJson manifest;
  manifest["image"] = a.out;
  manifest["family"] = family.name();
  manifest["id"] = a.id;
  manifest["tag_size"] = a.tag_size;
  manifest["pose"] = pose_to_json(pose);
  manifest["corners"] = corners;
  std::cout << manifest.dump(2) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skyanchor: tag localization, plane anchoring and weather scene service"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging on standard error");

  std::string image, family = kDefaultFamily, params, intrinsics = kDefaultIntrinsics;
  double tag_size = 0.1;

  auto* detect_cmd = app.add_subcommand("detect", "Detect tags in a PGM image; JSON on standard output");
  detect_cmd->add_option("--image", image, "Binary PGM")->required();
  detect_cmd->add_option("--family", family, "Codebook file");
  detect_cmd->add_option("--params", params, "Detector params JSON");

  auto* pose_cmd = app.add_subcommand("pose", "Detect tags and estimate their poses");
  pose_cmd->add_option("--image", image, "Binary PGM")->required();
  pose_cmd->add_option("--intrinsics", intrinsics, "Camera intrinsics JSON");
  pose_cmd->add_option("--tag-size", tag_size, "Tag edge length in meters");
  pose_cmd->add_option("--family", family, "Codebook file");
  pose_cmd->add_option("--params", params, "Detector params JSON");

  std::string scene, trajectory, mode = "both", summary;
  auto* sim_cmd = app.add_subcommand("simulate-drift", "Replay a trajectory; per-frame CSV on standard output");
  sim_cmd->add_option("--scene", scene, "Scene JSON")->required();
  sim_cmd->add_option("--trajectory", trajectory, "Trajectory JSON")->required();
  sim_cmd->add_option("--mode", mode, "marker_only, fused or both")
      ->check(CLI::IsMember({"marker_only", "fused", "both"}));
  sim_cmd->add_option("--summary", summary, "Also write JSON summaries to this file");

  std::string config = std::string(SKYANCHOR_DATA_DIR) + "/config/service.json";
  int serve_port = -1;
  bool no_poll = false;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API service");
  serve_cmd->add_option("--config", config, "Service config JSON");
  serve_cmd->add_option("--port", serve_port, "Override the configured port (0 picks one)");
  serve_cmd->add_flag("--no-poll", no_poll, "Do not poll the upstream endpoints");

  std::string mock_host = "127.0.0.1";
  int mock_port = 8090;
  std::string cwb = std::string(SKYANCHOR_DATA_DIR) + "/fixtures/cwb_observations.json";
  std::string epa = std::string(SKYANCHOR_DATA_DIR) + "/fixtures/epa_pm25.json";
  auto* mock_cmd = app.add_subcommand("mock-weather", "Serve fixture payloads on GET /cwb and GET /epa");
  mock_cmd->add_option("--host", mock_host);
  mock_cmd->add_option("--port", mock_port, "0 picks a free port");
  mock_cmd->add_option("--cwb", cwb, "CWB-style payload file");
  mock_cmd->add_option("--epa", epa, "EPA-style payload file");

  RenderArgs ra;
  auto* render_cmd = app.add_subcommand("render", "Render a synthetic tag image; manifest JSON on standard output");
  render_cmd->add_option("--out", ra.out, "Output PGM")->required();
  render_cmd->add_option("--id", ra.id);
  render_cmd->add_option("--family", ra.family);
  render_cmd->add_option("--intrinsics", ra.intrinsics);
  render_cmd->add_option("--tag-size", ra.tag_size);
  render_cmd->add_option("--distance", ra.distance, "Tag z in the camera frame, meters");
  render_cmd->add_option("--tx", ra.tx);
  render_cmd->add_option("--ty", ra.ty);
  render_cmd->add_option("--roll", ra.roll, "Degrees about x");
  render_cmd->add_option("--pitch", ra.pitch, "Degrees about y");
  render_cmd->add_option("--yaw", ra.yaw, "Degrees about z");
  render_cmd->add_option("--noise", ra.noise, "Gaussian sigma in gray levels");
  render_cmd->add_option("--seed", ra.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kFailure;
  }
  logger()->set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*detect_cmd) return cmd_detect(image, family, params);
    if (*pose_cmd) return cmd_pose(image, family, params, intrinsics, tag_size);
    if (*sim_cmd) return cmd_simulate(scene, trajectory, mode, summary);
    if (*serve_cmd) return cmd_serve(config, serve_port, !no_poll);
    if (*mock_cmd) return cmd_mock(mock_host, mock_port, cwb, epa);
    if (*render_cmd) return cmd_render(ra);
  } catch (const Error& e) {
    logger()->error("{}: {}", to_string(e.code()), e.what());
    return kFailure;
  } catch (const std::exception& e) {
    logger()->error("{}", e.what());
    return kFailure;
  }
  return kFailure;
}
