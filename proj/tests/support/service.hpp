#pragma once

#include <string>
#include <vector>

// Eigen (via the service header) must precede httplib: <resolv.h> defines
// _res as a macro.
#include "skyanchor/api_service.hpp"

#include <httplib.h>
#include <json.hpp>

#include "support/fs.hpp"

namespace skyanchor::testing {

/// Service config over the shipped data files, bound to a free local port
/// and polling `mock_base` (when non-empty).
inline ServiceConfig test_service_config(const std::string& mock_base, const std::string& cwb_path = "/cwb",
                                         const std::string& epa_path = "/epa") {
  nlohmann::json j = nlohmann::json::parse(slurp(kData / "config" / "service.json"));
  j["port"] = 0;
  j["endpoints"] = nlohmann::json::array();
  if (!mock_base.empty()) {
    j["endpoints"].push_back({{"url", mock_base + cwb_path}, {"source", "cwb"}});
    j["endpoints"].push_back({{"url", mock_base + epa_path}, {"source", "epa"}});
  }
  return ServiceConfig::from_json(j, kData / "config");
}

struct HttpResult {
  int status = 0;
  std::string body;
  nlohmann::json json() const { return nlohmann::json::parse(body); }
};

inline HttpResult http_get(const std::string& base, const std::string& path) {
  httplib::Client c(base);
  auto r = c.Get(path);
  if (!r) return {-1, httplib::to_string(r.error())};
  return {r->status, r->body};
}

inline HttpResult http_post(const std::string& base, const std::string& path, const std::string& body,
                            const std::string& type = "application/json") {
  httplib::Client c(base);
  auto r = c.Post(path, body, type);
  if (!r) return {-1, httplib::to_string(r.error())};
  return {r->status, r->body};
}

}  // namespace skyanchor::testing
