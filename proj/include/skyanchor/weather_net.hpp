#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include "skyanchor/weather.hpp"

namespace httplib {
class Server;
}

namespace skyanchor {

/// HTTP GET of `url` (http://host[:port]/path[?query]) parsed by the
/// adapter for `source`. Connection failures and non-200 answers raise
/// NetworkError; payloads the adapter rejects raise SchemaError.
ParsedPayload fetch_observations(const std::string& url, SourceKind source, const CityRegistry& cities,
                                 const AqiTable& aqi, double timeout_s = 5.0);

struct PollEndpoint {
  std::string url;
  SourceKind source = SourceKind::Cwb;
};

struct PollerConfig {
  std::vector<PollEndpoint> endpoints;
  double period_s = 60.0;
  double backoff_base_s = 1.0;
  double backoff_cap_s = 300.0;
  double timeout_s = 5.0;
};

/// Delay before retry number `failures` (1-based): base * 2^(failures-1),
/// capped.
double backoff_delay(int failures, double base_s, double cap_s);

struct PollStats {
  std::uint64_t attempts = 0;
  std::uint64_t successes = 0;
  std::uint64_t network_errors = 0;
  std::uint64_t schema_errors = 0;
  std::uint64_t records_changed = 0;
  std::uint64_t dropped = 0;
};

/// Fetches every endpoint each period and feeds the store. Network failures
/// are retried per endpoint with exponential backoff; schema failures are
/// logged and the endpoint waits for the next period.
class WeatherPoller {
 public:
  WeatherPoller(PollerConfig config, WeatherStore& store, AqiTable aqi);
  ~WeatherPoller();
  WeatherPoller(const WeatherPoller&) = delete;
  WeatherPoller& operator=(const WeatherPoller&) = delete;

  /// One synchronous pass over all endpoints, outside the schedule.
  PollStats poll_once();

  void start();
  void stop();
  bool running() const { return thread_.joinable(); }

  PollStats stats() const;

 private:
  enum class Outcome { Ok, Network, Schema };
  Outcome attempt(const PollEndpoint& e);
  void run(std::stop_token st);

  PollerConfig config_;
  WeatherStore& store_;
  AqiTable aqi_;
  mutable std::mutex stats_mutex_;
  PollStats stats_;
  std::mutex wake_mutex_;
  std::condition_variable_any wake_;
  std::jthread thread_;
};

/// Stand-in for the upstream services. GET /cwb and GET /epa answer with
/// the configured payloads. Query parameters script failures:
///   fail=K       the first K requests with this exact query answer 500
///   mode=schema  answer a payload without the expected top-level key
///   mode=empty   answer an empty entry list
class MockWeatherServer {
 public:
  MockWeatherServer(std::string cwb_body, std::string epa_body);
  static std::unique_ptr<MockWeatherServer> from_files(const std::filesystem::path& cwb,
                                                       const std::filesystem::path& epa);
  ~MockWeatherServer();
  MockWeatherServer(const MockWeatherServer&) = delete;
  MockWeatherServer& operator=(const MockWeatherServer&) = delete;

  void set_payload(SourceKind source, std::string body);

  /// Port 0 picks a free port. Returns the bound port; IoError when the
  /// port is taken.
  int bind(const std::string& host, int port);
  /// Serves on a background thread until stop().
  void start();
  /// Serves on the calling thread until stop() from elsewhere.
  void run();
  void stop();

  std::uint64_t requests() const { return requests_.load(); }
  std::string base_url() const;

 private:
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  mutable std::mutex mutex_;
  std::string cwb_body_;
  std::string epa_body_;
  std::map<std::string, int> seen_;
  std::atomic<std::uint64_t> requests_{0};
  std::string host_;
  int port_ = 0;
};

}  // namespace skyanchor
