#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace skyanchor {

enum class Metric { UV, Temperature, PM25, Rainfall };

inline constexpr Metric kAllMetrics[] = {Metric::UV, Metric::Temperature, Metric::PM25, Metric::Rainfall};

/// Path segment form: uv, temperature, pm25, rainfall.
std::string_view to_string(Metric m);
/// Throws UnknownMetric.
Metric metric_from_string(std::string_view s);

/// Readings for one city. A metric the source did not report is absent.
struct WeatherRecord {
  std::string city;
  std::int64_t timestamp = 0;  ///< UTC seconds
  std::optional<double> uv_index;
  std::optional<double> temperature_c;
  std::optional<double> pm25_aqi;
  std::optional<double> rainfall_mm_hr;

  std::optional<double> value(Metric m) const;
  std::optional<double>& value(Metric m);

  bool operator==(const WeatherRecord&) const = default;
};

/// Range checks on present metrics; throws InvariantViolation.
void validate(const WeatherRecord& r);

/// Canonical text: fixed key order, no whitespace, absent metrics as null.
std::string to_json(const WeatherRecord& r);
/// Throws ParseError on malformed text or wrong types, InvariantViolation on
/// out-of-range values.
WeatherRecord record_from_json(std::string_view text);

nlohmann::ordered_json record_to_json_value(const WeatherRecord& r);
WeatherRecord record_from_json_value(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Cities

struct City {
  std::string name;
  double map_x = 0.0;  ///< normalized [0,1] across the map image
  double map_y = 0.0;
  std::vector<std::string> aliases;
};

class CityRegistry {
 public:
  CityRegistry() = default;
  explicit CityRegistry(std::vector<City> cities);

  /// JSON array of {name, map_x, map_y[, aliases]}. Throws ConfigError.
  static CityRegistry load(const std::filesystem::path& path);

  const std::vector<City>& cities() const { return cities_; }
  bool contains(std::string_view name) const;
  /// Canonical name for a canonical name or alias.
  std::optional<std::string> canonical(std::string_view name) const;

 private:
  std::vector<City> cities_;
  std::map<std::string, std::string, std::less<>> lookup_;
};

// ---------------------------------------------------------------------------
// PM2.5 concentration to AQI

struct AqiBreakpoint {
  double c_lo, c_hi;  ///< ug/m3
  double i_lo, i_hi;  ///< index
};

class AqiTable {
 public:
  AqiTable() = default;
  explicit AqiTable(std::vector<AqiBreakpoint> rows);

  /// Table shipped with the data directory layout: {"pm25": [{c_lo, c_hi,
  /// i_lo, i_hi}, ...]}. Throws ConfigError.
  static AqiTable load(const std::filesystem::path& path);
  /// 24-hour PM2.5 breakpoints of the 2012 US EPA standard.
  static AqiTable epa2012();

  /// Concentration is truncated to 0.1 ug/m3, interpolated within its band
  /// and rounded to an integer index. Above the table the index saturates at
  /// the top. Negative concentration throws InvariantViolation.
  double aqi(double concentration) const;

  const std::vector<AqiBreakpoint>& rows() const { return rows_; }

 private:
  std::vector<AqiBreakpoint> rows_;
};

// ---------------------------------------------------------------------------
// Source adapters

enum class SourceKind { Cwb, Epa };

std::string_view to_string(SourceKind s);
SourceKind source_from_string(std::string_view s);

struct ParsedPayload {
  std::vector<WeatherRecord> records;
  std::size_t dropped = 0;  ///< entries naming cities outside the registry
};

/// {"observations": [{station, obs_time, uv_index?, temperature_c?,
/// rainfall_mm_hr?}]}. Throws SchemaError.
ParsedPayload parse_cwb(std::string_view body, const CityRegistry& cities);

/// {"records": [{county, timestamp, pm25_ugm3?}]}. Throws SchemaError.
ParsedPayload parse_epa(std::string_view body, const CityRegistry& cities, const AqiTable& aqi);

ParsedPayload parse_payload(SourceKind kind, std::string_view body, const CityRegistry& cities,
                            const AqiTable& aqi);

// ---------------------------------------------------------------------------
// Store

/// Latest value of each metric per city plus a bounded log of ingested
/// records. One writer, many readers.
class WeatherStore {
 public:
  explicit WeatherStore(CityRegistry cities, std::size_t history_capacity = 4096);

  /// Merges each metric whose reading is newer than the stored one. Returns
  /// how many records changed anything; those are appended to the history.
  std::size_t ingest(const std::vector<WeatherRecord>& records);

  /// Throws UnknownCity or NoDataYet.
  WeatherRecord latest(std::string_view city) const;
  std::map<std::string, WeatherRecord> snapshot() const;
  std::vector<WeatherRecord> history() const;
  /// Bumped on every ingest that changed something.
  std::uint64_t version() const;

  const CityRegistry& cities() const { return cities_; }

 private:
  struct Entry {
    WeatherRecord record;
    std::map<Metric, std::int64_t> metric_time;
  };

  CityRegistry cities_;
  std::size_t capacity_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, Entry, std::less<>> latest_;
  std::deque<WeatherRecord> history_;
  std::uint64_t version_ = 0;
};

}  // namespace skyanchor
