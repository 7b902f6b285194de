#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "skyanchor/weather.hpp"

namespace skyanchor {

struct Color {
  double r = 0.0, g = 0.0, b = 0.0;

  bool operator==(const Color&) const = default;
};

/// 0.2126 r + 0.7152 g + 0.0722 b on the stored components.
double relative_luminance(const Color& c);

struct ColorStop {
  double value;
  Color color;
};

/// Ramp anchors and constants; defaults reproduce the shipped
/// data/config/mapper.json.
struct MapperConfig {
  std::vector<ColorStop> uv_stops;
  double temp_min = -10.0;
  double temp_max = 40.0;
  Color temp_cold{0.0, 0.0, 1.0};
  Color temp_hot{1.0, 0.0, 0.0};
  std::vector<ColorStop> pm25_stops;
  double rain_cap = 80.0;  ///< mm/hr at full density
  Color rain_color{0.25, 0.55, 0.95};
  double baseline_density = 0.3;

  MapperConfig();
  /// Throws ConfigError on unordered stops or out-of-range colors.
  void validate() const;
  static MapperConfig load(const std::filesystem::path& path);
};

Color uv_to_color(double uv, const MapperConfig& cfg = {});

struct TemperatureVisual {
  Color color;
  double convection_intensity = 0.0;
};
TemperatureVisual temp_to_visual(double t, const MapperConfig& cfg = {});

Color pm25_to_color(double aqi, const MapperConfig& cfg = {});

double rainfall_to_density(double rain, const MapperConfig& cfg = {});

struct SceneSpec {
  std::string city;
  Metric metric = Metric::UV;
  Color sphere_color;
  double particle_density = 0.0;
  double convection_intensity = 0.0;
  std::string pin_label;
  std::int64_t timestamp = 0;

  bool operator==(const SceneSpec&) const = default;
};

std::string_view metric_unit(Metric m);

/// Throws NoDataYet when the record lacks the metric.
SceneSpec build_scene(const WeatherRecord& record, Metric metric, const MapperConfig& cfg = {});

}  // namespace skyanchor
