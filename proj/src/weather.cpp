#include "skyanchor/weather.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>

#include "skyanchor/error.hpp"

namespace skyanchor {

using nlohmann::json;

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::UV:
      return "uv";
    case Metric::Temperature:
      return "temperature";
    case Metric::PM25:
      return "pm25";
    case Metric::Rainfall:
      return "rainfall";
  }
  return "uv";
}

Metric metric_from_string(std::string_view s) {
  for (Metric m : kAllMetrics)
    if (to_string(m) == s) return m;
  fail(ErrorCode::UnknownMetric, "unknown metric '" + std::string(s) + "'");
}

std::optional<double> WeatherRecord::value(Metric m) const {
  return const_cast<WeatherRecord*>(this)->value(m);
}

std::optional<double>& WeatherRecord::value(Metric m) {
  switch (m) {
    case Metric::UV:
      return uv_index;
    case Metric::Temperature:
      return temperature_c;
    case Metric::PM25:
      return pm25_aqi;
    case Metric::Rainfall:
      return rainfall_mm_hr;
  }
  return uv_index;
}

void validate(const WeatherRecord& r) {
  auto bad = [&](const std::string& what) {
    fail(ErrorCode::InvariantViolation, "record for '" + r.city + "': " + what);
  };
  if (r.city.empty()) bad("empty city");
  for (Metric m : kAllMetrics)
    if (r.value(m) && !std::isfinite(*r.value(m))) bad(std::string(to_string(m)) + " is not finite");
  if (r.uv_index && *r.uv_index < 0.0) bad("uv_index < 0");
  if (r.pm25_aqi && (*r.pm25_aqi < 0.0 || *r.pm25_aqi > 500.0)) bad("pm25_aqi outside [0, 500]");
  if (r.rainfall_mm_hr && *r.rainfall_mm_hr < 0.0) bad("rainfall_mm_hr < 0");
}

namespace {

constexpr const char* kMetricKeys[] = {"uv_index", "temperature_c", "pm25_aqi", "rainfall_mm_hr"};

std::string read_file(const std::filesystem::path& path, ErrorCode code) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(code, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

nlohmann::ordered_json record_to_json_value(const WeatherRecord& r) {
  nlohmann::ordered_json j;
  j["city"] = r.city;
  j["timestamp"] = r.timestamp;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& v = r.value(kAllMetrics[i]);
    if (v)
      j[kMetricKeys[i]] = *v;
    else
      j[kMetricKeys[i]] = nullptr;
  }
  return j;
}

std::string to_json(const WeatherRecord& r) { return record_to_json_value(r).dump(); }

WeatherRecord record_from_json_value(const json& j) {
  if (!j.is_object()) fail(ErrorCode::ParseError, "weather record must be a JSON object");
  WeatherRecord r;
  const auto city = j.find("city");
  if (city == j.end() || !city->is_string()) fail(ErrorCode::ParseError, "weather record needs a string city");
  r.city = city->get<std::string>();
  const auto ts = j.find("timestamp");
  if (ts == j.end() || !ts->is_number_integer())
    fail(ErrorCode::ParseError, "weather record needs an integer timestamp");
  r.timestamp = ts->get<std::int64_t>();
  for (std::size_t i = 0; i < 4; ++i) {
    const auto it = j.find(kMetricKeys[i]);
    if (it == j.end() || it->is_null()) continue;
    if (!it->is_number()) fail(ErrorCode::ParseError, std::string(kMetricKeys[i]) + " must be a number or null");
    r.value(kAllMetrics[i]) = it->get<double>();
  }
  validate(r);
  return r;
}

WeatherRecord record_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::ParseError, std::string("weather record: ") + e.what());
  }
  return record_from_json_value(j);
}

// ---------------------------------------------------------------------------
// Cities

CityRegistry::CityRegistry(std::vector<City> cities) : cities_(std::move(cities)) {
  for (const City& c : cities_) {
    if (c.name.empty()) fail(ErrorCode::ConfigError, "city with empty name");
    if (!(c.map_x >= 0.0 && c.map_x <= 1.0 && c.map_y >= 0.0 && c.map_y <= 1.0))
      fail(ErrorCode::ConfigError, "map coordinates of '" + c.name + "' outside [0,1]");
    if (!lookup_.emplace(c.name, c.name).second) fail(ErrorCode::ConfigError, "duplicate city '" + c.name + "'");
  }
  for (const City& c : cities_)
    for (const std::string& alias : c.aliases)
      if (!lookup_.emplace(alias, c.name).second)
        fail(ErrorCode::ConfigError, "alias '" + alias + "' is already taken");
}

CityRegistry CityRegistry::load(const std::filesystem::path& path) {
  const std::string text = read_file(path, ErrorCode::ConfigError);
  std::vector<City> cities;
  try {
    const json j = json::parse(text);
    if (!j.is_array()) fail(ErrorCode::ConfigError, path.string() + ": expected an array of cities");
    for (const json& e : j) {
      City c;
      c.name = e.at("name").get<std::string>();
      c.map_x = e.at("map_x").get<double>();
      c.map_y = e.at("map_y").get<double>();
      if (e.contains("aliases")) c.aliases = e.at("aliases").get<std::vector<std::string>>();
      cities.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
  return CityRegistry(std::move(cities));
}

bool CityRegistry::contains(std::string_view name) const { return canonical(name).has_value(); }

std::optional<std::string> CityRegistry::canonical(std::string_view name) const {
  const auto it = lookup_.find(name);
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// AQI

AqiTable::AqiTable(std::vector<AqiBreakpoint> rows) : rows_(std::move(rows)) {
  if (rows_.empty()) fail(ErrorCode::ConfigError, "empty AQI table");
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const AqiBreakpoint& r = rows_[i];
    if (!(r.c_lo < r.c_hi) || !(r.i_lo < r.i_hi)) fail(ErrorCode::ConfigError, "AQI row with empty band");
    if (i > 0 && !(r.c_lo > rows_[i - 1].c_hi && r.i_lo > rows_[i - 1].i_hi))
      fail(ErrorCode::ConfigError, "AQI rows must be increasing and disjoint");
  }
  if (rows_.front().c_lo != 0.0 || rows_.front().i_lo != 0.0)
    fail(ErrorCode::ConfigError, "AQI table must start at zero");
  if (rows_.back().i_hi > 500.0) fail(ErrorCode::ConfigError, "AQI table exceeds 500");
}

AqiTable AqiTable::epa2012() {
  return AqiTable({{0.0, 12.0, 0, 50},
                   {12.1, 35.4, 51, 100},
                   {35.5, 55.4, 101, 150},
                   {55.5, 150.4, 151, 200},
                   {150.5, 250.4, 201, 300},
                   {250.5, 350.4, 301, 400},
                   {350.5, 500.4, 401, 500}});
}

AqiTable AqiTable::load(const std::filesystem::path& path) {
  const std::string text = read_file(path, ErrorCode::ConfigError);
  std::vector<AqiBreakpoint> rows;
  try {
    const json doc = json::parse(text);
    for (const json& e : doc.at("pm25"))
      rows.push_back({e.at("c_lo").get<double>(), e.at("c_hi").get<double>(), e.at("i_lo").get<double>(),
                      e.at("i_hi").get<double>()});
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
  return AqiTable(std::move(rows));
}

double AqiTable::aqi(double concentration) const {
  if (rows_.empty()) fail(ErrorCode::ConfigError, "empty AQI table");
  if (!(concentration >= 0.0)) fail(ErrorCode::InvariantViolation, "negative PM2.5 concentration");
  const double c = std::floor(concentration * 10.0 + 1e-9) / 10.0;
  if (c > rows_.back().c_hi) return rows_.back().i_hi;
  for (const AqiBreakpoint& r : rows_) {
    if (c <= r.c_hi + 1e-9) {
      const double cc = std::max(c, r.c_lo);
      return std::round((r.i_hi - r.i_lo) / (r.c_hi - r.c_lo) * (cc - r.c_lo) + r.i_lo);
    }
  }
  return rows_.back().i_hi;
}

// ---------------------------------------------------------------------------
// Adapters

std::string_view to_string(SourceKind s) { return s == SourceKind::Cwb ? "cwb" : "epa"; }

SourceKind source_from_string(std::string_view s) {
  if (s == "cwb") return SourceKind::Cwb;
  if (s == "epa") return SourceKind::Epa;
  fail(ErrorCode::ConfigError, "unknown source kind '" + std::string(s) + "'");
}

namespace {

json parse_body(std::string_view body, const char* source) {
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::SchemaError, std::string(source) + " payload is not JSON: " + e.what());
  }
}

const json& entries(const json& doc, const char* key, const char* source) {
  if (!doc.is_object() || !doc.contains(key) || !doc.at(key).is_array())
    fail(ErrorCode::SchemaError, std::string(source) + " payload needs an array '" + key + "'");
  return doc.at(key);
}

std::string string_field(const json& e, const char* key, const char* source) {
  if (!e.is_object() || !e.contains(key) || !e.at(key).is_string())
    fail(ErrorCode::SchemaError, std::string(source) + " entry needs a string '" + key + "'");
  return e.at(key).get<std::string>();
}

std::int64_t time_field(const json& e, const char* key, const char* source) {
  if (!e.contains(key) || !e.at(key).is_number_integer())
    fail(ErrorCode::SchemaError, std::string(source) + " entry needs an integer '" + key + "'");
  return e.at(key).get<std::int64_t>();
}

std::optional<double> number_field(const json& e, const char* key, const char* source) {
  if (!e.contains(key) || e.at(key).is_null()) return std::nullopt;
  if (!e.at(key).is_number())
    fail(ErrorCode::SchemaError, std::string(source) + " field '" + key + "' must be a number or null");
  return e.at(key).get<double>();
}

void check_record(const WeatherRecord& r, const char* source) {
  try {
    validate(r);
  } catch (const Error& e) {
    fail(ErrorCode::SchemaError, std::string(source) + ": " + e.what());
  }
}

}  // namespace

ParsedPayload parse_cwb(std::string_view body, const CityRegistry& cities) {
  const json doc = parse_body(body, "cwb");
  ParsedPayload out;
  for (const json& e : entries(doc, "observations", "cwb")) {
    const std::string station = string_field(e, "station", "cwb");
    WeatherRecord r;
    r.timestamp = time_field(e, "obs_time", "cwb");
    r.uv_index = number_field(e, "uv_index", "cwb");
    r.temperature_c = number_field(e, "temperature_c", "cwb");
    r.rainfall_mm_hr = number_field(e, "rainfall_mm_hr", "cwb");
    const auto name = cities.canonical(station);
    if (!name) {
      ++out.dropped;
      continue;
    }
    r.city = *name;
    check_record(r, "cwb");
    out.records.push_back(std::move(r));
  }
  return out;
}

ParsedPayload parse_epa(std::string_view body, const CityRegistry& cities, const AqiTable& aqi) {
  const json doc = parse_body(body, "epa");
  ParsedPayload out;
  for (const json& e : entries(doc, "records", "epa")) {
    const std::string county = string_field(e, "county", "epa");
    WeatherRecord r;
    r.timestamp = time_field(e, "timestamp", "epa");
    if (const auto c = number_field(e, "pm25_ugm3", "epa")) {
      if (*c < 0.0) fail(ErrorCode::SchemaError, "epa: negative pm25_ugm3 for '" + county + "'");
      r.pm25_aqi = aqi.aqi(*c);
    }
    const auto name = cities.canonical(county);
    if (!name) {
      ++out.dropped;
      continue;
    }
    r.city = *name;
    check_record(r, "epa");
    out.records.push_back(std::move(r));
  }
  return out;
}

ParsedPayload parse_payload(SourceKind kind, std::string_view body, const CityRegistry& cities,
                            const AqiTable& aqi) {
  return kind == SourceKind::Cwb ? parse_cwb(body, cities) : parse_epa(body, cities, aqi);
}

// ---------------------------------------------------------------------------
// Store

WeatherStore::WeatherStore(CityRegistry cities, std::size_t history_capacity)
    : cities_(std::move(cities)), capacity_(history_capacity) {}

std::size_t WeatherStore::ingest(const std::vector<WeatherRecord>& records) {
  std::vector<WeatherRecord> incoming;
  incoming.reserve(records.size());
  for (const WeatherRecord& r : records) {
    validate(r);
    const auto name = cities_.canonical(r.city);
    if (!name) fail(ErrorCode::UnknownCity, "unknown city '" + r.city + "'");
    incoming.push_back(r);
    incoming.back().city = *name;
  }

  std::unique_lock lock(mutex_);
  std::size_t changed = 0;
  for (const WeatherRecord& r : incoming) {
    Entry& e = latest_[r.city];
    e.record.city = r.city;
    bool updated = false;
    for (Metric m : kAllMetrics) {
      if (!r.value(m)) continue;
      const auto t = e.metric_time.find(m);
      if (t != e.metric_time.end() && r.timestamp <= t->second) continue;
      e.record.value(m) = r.value(m);
      e.metric_time[m] = r.timestamp;
      updated = true;
    }
    if (!updated) continue;
    e.record.timestamp = std::max(e.record.timestamp, r.timestamp);
    ++changed;
    history_.push_back(r);
    while (history_.size() > capacity_) history_.pop_front();
  }
  // Cities seen only with empty records must not look populated.
  std::erase_if(latest_, [](const auto& kv) { return kv.second.metric_time.empty(); });
  if (changed) ++version_;
  return changed;
}

WeatherRecord WeatherStore::latest(std::string_view city) const {
  const auto name = cities_.canonical(city);
  if (!name) fail(ErrorCode::UnknownCity, "unknown city '" + std::string(city) + "'");
  std::shared_lock lock(mutex_);
  const auto it = latest_.find(*name);
  if (it == latest_.end()) fail(ErrorCode::NoDataYet, "no data yet for '" + *name + "'");
  return it->second.record;
}

std::map<std::string, WeatherRecord> WeatherStore::snapshot() const {
  std::shared_lock lock(mutex_);
  std::map<std::string, WeatherRecord> out;
  for (const auto& [name, e] : latest_) out.emplace(name, e.record);
  return out;
}

std::vector<WeatherRecord> WeatherStore::history() const {
  std::shared_lock lock(mutex_);
  return {history_.begin(), history_.end()};
}

std::uint64_t WeatherStore::version() const {
  std::shared_lock lock(mutex_);
  return version_;
}

}  // namespace skyanchor
