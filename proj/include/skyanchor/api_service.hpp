#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "skyanchor/anchor_fusion.hpp"
#include "skyanchor/detector.hpp"
#include "skyanchor/plane_detector.hpp"
#include "skyanchor/viz_mapper.hpp"
#include "skyanchor/weather.hpp"
#include "skyanchor/weather_net.hpp"

namespace httplib {
class Server;
}

namespace skyanchor {

/// Keys of the service configuration file. Relative paths resolve against
/// the directory holding the file.
///
///   host, port                 bind address (default 127.0.0.1:8080)
///   cities                     city list (required)
///   family                     tag codebook (required)
///   intrinsics                 camera intrinsics object or path (required)
///   tag_size                   meters, > 0 (default 0.1)
///   detector, mapper, aqi_breakpoints   optional config files
///   fusion                     optional fusion params object
///   poll_period_s              default 60
///   backoff_base_s, backoff_cap_s       default 1 and 300
///   endpoints                  [{"url", "source": "cwb"|"epa"}]
struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path cities;
  std::filesystem::path family;
  CameraIntrinsics intrinsics;
  double tag_size = 0.1;
  std::optional<std::filesystem::path> detector;
  std::optional<std::filesystem::path> mapper;
  std::optional<std::filesystem::path> aqi_breakpoints;
  FusionParams fusion;
  PollerConfig poller;

  /// Throws ConfigError on missing keys, missing files or tag_size <= 0.
  static ServiceConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static ServiceConfig load(const std::filesystem::path& path);
  void validate() const;
};

/// HTTP front of the weather store, the mappers and the localization
/// session. Routes:
///   GET  /health
///   GET  /cities
///   GET  /weather/{city}
///   GET  /scene/{city}/{metric}
///   POST /localize            body: binary PGM
///   GET  /anchor
///   POST /anchor/observation  body: {tag_pose_cam, camera_pose_world, timestamp, tag_in_model} or {}
///   POST /simulate            body: {scene, trajectory, mode}
///   GET  /planes
///   POST /planes/points       body: {points: [[x, y, z]], seed}
/// Failures answer {"error": code, "message": text}.
class ApiService {
 public:
  explicit ApiService(ServiceConfig config);
  ~ApiService();
  ApiService(const ApiService&) = delete;
  ApiService& operator=(const ApiService&) = delete;

  /// Binds the configured address; a configured port of 0 picks a free one.
  /// Throws IoError when the port is taken.
  int bind();
  /// Serves on a background thread. With `poll` the background poller runs
  /// too (when endpoints are configured).
  void start(bool poll = true);
  /// Same as start but serves on the calling thread until stop().
  void run(bool poll = true);
  void stop();

  /// One synchronous fetch of every endpoint.
  PollStats poll_once();

  WeatherStore& store() { return store_; }
  const MapperConfig& mapper() const { return mapper_; }
  std::string base_url() const;
  int port() const { return port_; }

 private:
  void install_routes();

  ServiceConfig config_;
  CityRegistry cities_;
  AqiTable aqi_;
  MapperConfig mapper_;
  TagFamily family_;
  DetectorParams detector_;
  WeatherStore store_;
  WeatherPoller poller_;

  std::mutex session_mutex_;
  PlaneSet planes_;
  std::optional<WorldAnchor> anchor_;
  std::uint64_t plane_seed_ = 1;

  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace skyanchor
