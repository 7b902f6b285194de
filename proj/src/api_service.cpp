#include "skyanchor/api_service.hpp"

#include <httplib.h>

#include "http_socket.hpp"

#include "skyanchor/error.hpp"
#include "skyanchor/json_io.hpp"
#include "skyanchor/log.hpp"
#include "skyanchor/pose_estimator.hpp"

namespace skyanchor {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownCity:
      return 404;
    case ErrorCode::NoDataYet:
      return 503;
    case ErrorCode::IoError:
    case ErrorCode::NetworkError:
      return 500;
    default:
      return 400;
  }
}

void send_json(httplib::Response& res, const OrderedJson& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  OrderedJson body;
  body["error"] = std::string(code);
  body["message"] = message;
  send_json(res, body, status);
}

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, std::string("request body: ") + e.what());
  }
}

// Every handler runs through here so library errors map to one response
// shape.
template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f = std::move(f)](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, http_status(e.code()), to_string(e.code()), e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, "ParseError", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "Internal", e.what());
    }
  };
}

std::string canonical_city(const CityRegistry& cities, const std::string& name) {
  auto c = cities.canonical(name);
  if (!c) fail(ErrorCode::UnknownCity, "unknown city: " + name);
  return *c;
}

}  // namespace

ServiceConfig ServiceConfig::from_json(const json& j, const fs::path& base_dir) {
  ServiceConfig c;
  try {
    if (!j.is_object()) fail(ErrorCode::ConfigError, "service config must be an object");
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    c.cities = resolve(base_dir, j.at("cities").get<std::string>());
    c.family = resolve(base_dir, j.at("family").get<std::string>());
    const json& k = j.at("intrinsics");
    c.intrinsics = k.is_string() ? intrinsics_from_json(read_json_file(resolve(base_dir, k.get<std::string>())))
                                 : intrinsics_from_json(k);
    c.tag_size = j.value("tag_size", c.tag_size);
    if (j.contains("detector")) c.detector = resolve(base_dir, j.at("detector").get<std::string>());
    if (j.contains("mapper")) c.mapper = resolve(base_dir, j.at("mapper").get<std::string>());
    if (j.contains("aqi_breakpoints")) c.aqi_breakpoints = resolve(base_dir, j.at("aqi_breakpoints").get<std::string>());
    if (j.contains("fusion")) c.fusion = fusion_params_from_json(j.at("fusion"));
    c.poller.period_s = j.value("poll_period_s", c.poller.period_s);
    c.poller.backoff_base_s = j.value("backoff_base_s", c.poller.backoff_base_s);
    c.poller.backoff_cap_s = j.value("backoff_cap_s", c.poller.backoff_cap_s);
    c.poller.timeout_s = j.value("timeout_s", c.poller.timeout_s);
    for (const auto& e : j.value("endpoints", json::array()))
      c.poller.endpoints.push_back({e.at("url").get<std::string>(), source_from_string(e.at("source").get<std::string>())});
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, std::string("service config: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    fail(ErrorCode::ConfigError, std::string("service config: ") + e.what());
  }
  c.validate();
  return c;
}

ServiceConfig ServiceConfig::load(const fs::path& path) {
  json j;
  try {
    j = read_json_file(path);
  } catch (const Error& e) {
    fail(ErrorCode::ConfigError, e.what());
  }
  return from_json(j, path.parent_path());
}

void ServiceConfig::validate() const {
  if (!(tag_size > 0.0)) fail(ErrorCode::ConfigError, "tag_size must be positive");
  if (port < 0 || port > 65535) fail(ErrorCode::ConfigError, "port out of range");
  if (!(poller.period_s > 0.0)) fail(ErrorCode::ConfigError, "poll_period_s must be positive");
  std::vector<fs::path> files{cities, family};
  for (const auto& o : {detector, mapper, aqi_breakpoints})
    if (o) files.push_back(*o);
  for (const auto& f : files)
    if (!fs::is_regular_file(f)) fail(ErrorCode::ConfigError, "missing file: " + f.string());
  try {
    intrinsics.validate();
  } catch (const Error& e) {
    fail(ErrorCode::ConfigError, e.what());
  }
}

// ---------------------------------------------------------------------------

namespace {

ServiceConfig validated(ServiceConfig c) {
  c.validate();
  return c;
}

template <typename F>
auto as_config_error(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    fail(ErrorCode::ConfigError, e.what());
  }
}

}  // namespace

ApiService::ApiService(ServiceConfig config)
    : config_(validated(std::move(config))),
      cities_(CityRegistry::load(config_.cities)),
      aqi_(config_.aqi_breakpoints ? AqiTable::load(*config_.aqi_breakpoints) : AqiTable::epa2012()),
      mapper_(config_.mapper ? MapperConfig::load(*config_.mapper) : MapperConfig{}),
      family_(as_config_error([&] { return TagFamily::load(config_.family); })),
      detector_(as_config_error([&] {
        DetectorParams p = config_.detector ? detector_params_from_json(read_json_file(*config_.detector)) : DetectorParams{};
        p.validate(family_);
        return p;
      })),
      store_(cities_),
      poller_(config_.poller, store_, aqi_),
      server_(std::make_unique<httplib::Server>()) {
  detail::exclusive_listen(*server_);
  install_routes();
}

ApiService::~ApiService() { stop(); }

void ApiService::install_routes() {
  httplib::Server& s = *server_;

  s.Get("/health", guarded([this](const httplib::Request&, httplib::Response& res) {
    OrderedJson body;
    body["status"] = "ok";
    body["cities"] = cities_.cities().size();
    body["store_version"] = store_.version();
    send_json(res, body);
  }));

  s.Get("/cities", guarded([this](const httplib::Request&, httplib::Response& res) {
    OrderedJson list = OrderedJson::array();
    for (const auto& c : cities_.cities()) list.push_back({{"name", c.name}, {"map_x", c.map_x}, {"map_y", c.map_y}});
    send_json(res, list);
  }));

  s.Get(R"(/weather/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const WeatherRecord r = store_.latest(canonical_city(cities_, req.matches[1]));
    res.set_content(to_json(r), "application/json");
  }));

  s.Get(R"(/scene/([^/]+)/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string city = canonical_city(cities_, req.matches[1]);
    const Metric metric = metric_from_string(std::string(req.matches[2]));
    send_json(res, scene_to_json(build_scene(store_.latest(city), metric, mapper_)));
  }));

  s.Post("/localize", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const GrayImage img = decode_pgm(req.body);
    const auto dets = detect(img, family_, detector_);
    OrderedJson poses = OrderedJson::array();
    for (const auto& d : dets) {
      try {
        poses.push_back(pose_estimate_to_json(estimate(d, config_.intrinsics, config_.tag_size)));
      } catch (const Error& e) {
        logger()->warn("pose for tag {} failed: {}", d.id, e.what());
        poses.push_back(nullptr);
      }
    }
    OrderedJson body;
    body["detections"] = detections_to_json(dets);
    body["poses"] = poses;
    send_json(res, body);
  }));

  s.Get("/anchor", guarded([this](const httplib::Request&, httplib::Response& res) {
    std::lock_guard lock(session_mutex_);
    if (!anchor_) return send_error(res, 404, "NoAnchor", "no anchor has been created");
    send_json(res, anchor_to_json(*anchor_));
  }));

  s.Post("/anchor/observation", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    std::optional<TagObservation> obs;
    if (body.contains("tag_pose_cam")) {
      TagObservation o;
      o.tag_pose_cam = pose_from_json(body.at("tag_pose_cam"));
      o.camera_pose_world = body.contains("camera_pose_world") ? pose_from_json(body.at("camera_pose_world")) : Pose{};
      o.timestamp = body.value("timestamp", 0.0);
      if (body.contains("tag_in_model")) o.tag_in_model = pose_from_json(body.at("tag_in_model"));
      obs = o;
    }
    std::lock_guard lock(session_mutex_);
    if (!anchor_) {
      if (!obs) return send_error(res, 404, "NoAnchor", "no anchor has been created");
      anchor_ = create_anchor(*obs, planes_, config_.fusion);
    } else {
      anchor_ = update_anchor(*anchor_, obs, planes_, config_.fusion);
    }
    send_json(res, anchor_to_json(*anchor_));
  }));

  s.Post("/simulate", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    const SceneFile sf = scene_file_from_json(body.at("scene"));
    const auto frames = trajectory_from_json(body.at("trajectory"));
    const FusionMode mode = fusion_mode_from_string(body.value("mode", std::string("fused")));
    const DriftReport report = simulate_trajectory(sf.scene, frames, mode, sf.fusion, sf.simulation);
    OrderedJson out;
    out["summary"] = drift_summary_to_json(report);
    std::lock_guard lock(session_mutex_);
    const DriftFrame& last = report.frames.back();
    if (!last.lost) {
      WorldAnchor a;
      a.pose = last.anchor;
      a.snapped = last.snapped;
      if (last.snapped) a.snapped_plane = sf.scene.plane.id;
      a.last_tag_observation = 0.0;
      for (const auto& f : report.frames)
        if (f.visible) {
          ++a.observation_count;
          a.last_tag_observation = f.frame * sf.simulation.frame_interval;
        }
      anchor_ = a;
    }
    out["anchor"] = anchor_ ? anchor_to_json(*anchor_) : OrderedJson(nullptr);
    send_json(res, out);
  }));

  s.Get("/planes", guarded([this](const httplib::Request&, httplib::Response& res) {
    std::lock_guard lock(session_mutex_);
    send_json(res, plane_set_to_json(planes_));
  }));

  s.Post("/planes/points", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    std::vector<Vec3> points;
    for (const auto& p : body.at("points")) {
      const auto v = p.get<std::vector<double>>();
      if (v.size() != 3) fail(ErrorCode::ParseError, "points must be [x, y, z]");
      points.emplace_back(v[0], v[1], v[2]);
    }
    std::lock_guard lock(session_mutex_);
    RansacParams params;
    params.seed = body.value("seed", plane_seed_++);
    planes_ = update_planes(planes_, points, params);
    send_json(res, plane_set_to_json(planes_));
  }));

  s.set_logger([](const httplib::Request& req, const httplib::Response& res) {
    logger()->info("method={} path={} status={} bytes={}", req.method, req.path, res.status, res.body.size());
  });
}

int ApiService::bind() {
  const int bound = config_.port == 0 ? server_->bind_to_any_port(config_.host)
                                      : (server_->bind_to_port(config_.host, config_.port) ? config_.port : -1);
  if (bound <= 0) fail(ErrorCode::IoError, "cannot bind " + config_.host + ":" + std::to_string(config_.port));
  port_ = bound;
  logger()->info("listening on {}", base_url());
  return bound;
}

void ApiService::start(bool poll) {
  if (port_ == 0) bind();
  if (poll && !config_.poller.endpoints.empty()) poller_.start();
  if (thread_.joinable()) return;
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void ApiService::run(bool poll) {
  if (port_ == 0) bind();
  if (poll && !config_.poller.endpoints.empty()) poller_.start();
  server_->listen_after_bind();
  poller_.stop();
}

void ApiService::stop() {
  poller_.stop();
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

PollStats ApiService::poll_once() { return poller_.poll_once(); }

std::string ApiService::base_url() const { return "http://" + config_.host + ":" + std::to_string(port_); }

}  // namespace skyanchor
