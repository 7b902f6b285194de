#include "skyanchor/weather_net.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <httplib.h>

#include "http_socket.hpp"

#include "skyanchor/error.hpp"
#include "skyanchor/log.hpp"

namespace skyanchor {

namespace {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string target;  // path[?query]
};

Url split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos || url.compare(0, scheme, "http") != 0)
    fail(ErrorCode::NetworkError, "unsupported url: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

std::string slurp_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

ParsedPayload fetch_observations(const std::string& url, SourceKind source, const CityRegistry& cities,
                                 const AqiTable& aqi, double timeout_s) {
  const Url u = split_url(url);
  httplib::Client client(u.origin);
  const auto secs = static_cast<time_t>(timeout_s);
  const auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  auto res = client.Get(u.target);
  if (!res) fail(ErrorCode::NetworkError, url + ": " + httplib::to_string(res.error()));
  if (res->status != 200) fail(ErrorCode::NetworkError, url + ": HTTP " + std::to_string(res->status));
  return parse_payload(source, res->body, cities, aqi);
}

double backoff_delay(int failures, double base_s, double cap_s) {
  if (failures <= 0) return 0.0;
  const double d = base_s * std::pow(2.0, std::min(failures - 1, 62));
  return std::min(d, cap_s);
}

// ---------------------------------------------------------------------------

WeatherPoller::WeatherPoller(PollerConfig config, WeatherStore& store, AqiTable aqi)
    : config_(std::move(config)), store_(store), aqi_(std::move(aqi)) {
  if (!(config_.period_s > 0.0) || !(config_.backoff_base_s > 0.0) || config_.backoff_cap_s < config_.backoff_base_s)
    fail(ErrorCode::InvalidParams, "poller periods must be positive and cap >= base");
}

WeatherPoller::~WeatherPoller() { stop(); }

WeatherPoller::Outcome WeatherPoller::attempt(const PollEndpoint& e) {
  {
    std::lock_guard lock(stats_mutex_);
    ++stats_.attempts;
  }
  try {
    const ParsedPayload p = fetch_observations(e.url, e.source, store_.cities(), aqi_, config_.timeout_s);
    const std::size_t changed = store_.ingest(p.records);
    std::lock_guard lock(stats_mutex_);
    ++stats_.successes;
    stats_.records_changed += changed;
    stats_.dropped += p.dropped;
    logger()->debug("{}: {} records, {} changed, {} dropped", e.url, p.records.size(), changed, p.dropped);
    return Outcome::Ok;
  } catch (const Error& err) {
    std::lock_guard lock(stats_mutex_);
    if (err.code() == ErrorCode::NetworkError) {
      ++stats_.network_errors;
      logger()->warn("{}", err.what());
      return Outcome::Network;
    }
    ++stats_.schema_errors;
    logger()->warn("{}: {} ({})", e.url, err.what(), to_string(err.code()));
    return Outcome::Schema;
  }
}

PollStats WeatherPoller::poll_once() {
  const PollStats before = stats();
  for (const auto& e : config_.endpoints) attempt(e);
  const PollStats after = stats();
  PollStats delta;
  delta.attempts = after.attempts - before.attempts;
  delta.successes = after.successes - before.successes;
  delta.network_errors = after.network_errors - before.network_errors;
  delta.schema_errors = after.schema_errors - before.schema_errors;
  delta.records_changed = after.records_changed - before.records_changed;
  delta.dropped = after.dropped - before.dropped;
  return delta;
}

void WeatherPoller::run(std::stop_token st) {
  using Clock = std::chrono::steady_clock;
  const auto seconds = [](double s) {
    return std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(s));
  };
  const std::size_t n = config_.endpoints.size();
  std::vector<Clock::time_point> due(n, Clock::now());
  std::vector<int> failures(n, 0);

  while (!st.stop_requested()) {
    const auto now = Clock::now();
    for (std::size_t i = 0; i < n && !st.stop_requested(); ++i) {
      if (due[i] > now) continue;
      const Outcome o = attempt(config_.endpoints[i]);
      if (o == Outcome::Network) {
        ++failures[i];
        due[i] = Clock::now() + seconds(backoff_delay(failures[i], config_.backoff_base_s, config_.backoff_cap_s));
      } else {
        failures[i] = 0;
        due[i] = Clock::now() + seconds(config_.period_s);
      }
    }
    const auto next = n == 0 ? Clock::now() + seconds(config_.period_s) : *std::min_element(due.begin(), due.end());
    std::unique_lock lock(wake_mutex_);
    wake_.wait_until(lock, st, next, [] { return false; });
  }
}

void WeatherPoller::start() {
  if (thread_.joinable()) return;
  thread_ = std::jthread([this](std::stop_token st) { run(st); });
}

void WeatherPoller::stop() {
  if (!thread_.joinable()) return;
  thread_.request_stop();
  wake_.notify_all();
  thread_.join();
}

PollStats WeatherPoller::stats() const {
  std::lock_guard lock(stats_mutex_);
  return stats_;
}

// ---------------------------------------------------------------------------

MockWeatherServer::MockWeatherServer(std::string cwb_body, std::string epa_body)
    : server_(std::make_unique<httplib::Server>()), cwb_body_(std::move(cwb_body)), epa_body_(std::move(epa_body)) {
  const auto handler = [this](SourceKind kind) {
    return [this, kind](const httplib::Request& req, httplib::Response& res) {
      ++requests_;
      const std::string key = req.target;
      int count;
      std::string body;
      {
        std::lock_guard lock(mutex_);
        count = ++seen_[key];
        body = kind == SourceKind::Cwb ? cwb_body_ : epa_body_;
      }
      if (req.has_param("fail")) {
        int k = 0;
        try {
          k = std::stoi(req.get_param_value("fail"));
        } catch (const std::exception&) {
          res.status = 400;
          res.set_content(R"({"error":"InvalidParams","message":"fail must be an integer"})", "application/json");
          return;
        }
        if (count <= k) {
          res.status = 500;
          res.set_content(R"({"error":"Injected","message":"scripted failure"})", "application/json");
          return;
        }
      }
      const std::string mode = req.has_param("mode") ? req.get_param_value("mode") : "";
      const char* list_key = kind == SourceKind::Cwb ? "observations" : "records";
      if (mode == "schema") {
        body = R"({"unexpected":[]})";
      } else if (mode == "empty") {
        body = std::string("{\"") + list_key + "\":[]}";
      }
      res.set_content(body, "application/json");
    };
  };
  detail::exclusive_listen(*server_);
  server_->Get("/cwb", handler(SourceKind::Cwb));
  server_->Get("/epa", handler(SourceKind::Epa));
  server_->Get("/health", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"status":"ok"})", "application/json");
  });
}

std::unique_ptr<MockWeatherServer> MockWeatherServer::from_files(const std::filesystem::path& cwb,
                                                                 const std::filesystem::path& epa) {
  return std::make_unique<MockWeatherServer>(slurp_file(cwb), slurp_file(epa));
}

MockWeatherServer::~MockWeatherServer() { stop(); }

void MockWeatherServer::set_payload(SourceKind source, std::string body) {
  std::lock_guard lock(mutex_);
  (source == SourceKind::Cwb ? cwb_body_ : epa_body_) = std::move(body);
}

int MockWeatherServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound <= 0) fail(ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(port));
  host_ = host;
  port_ = bound;
  return bound;
}

void MockWeatherServer::start() {
  if (thread_.joinable()) return;
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void MockWeatherServer::run() { server_->listen_after_bind(); }

void MockWeatherServer::stop() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockWeatherServer::base_url() const {
  return "http://" + host_ + ":" + std::to_string(port_);
}

}  // namespace skyanchor
