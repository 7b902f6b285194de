#include "skyanchor/viz_mapper.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "skyanchor/error.hpp"

namespace skyanchor {

namespace {

Color lerp(const Color& a, const Color& b, double s) {
  return {a.r + s * (b.r - a.r), a.g + s * (b.g - a.g), a.b + s * (b.b - a.b)};
}

Color clamp01(const Color& c) {
  return {std::clamp(c.r, 0.0, 1.0), std::clamp(c.g, 0.0, 1.0), std::clamp(c.b, 0.0, 1.0)};
}

// Piecewise-linear through the stops, flat outside them.
Color ramp(const std::vector<ColorStop>& stops, double v) {
  if (v <= stops.front().value) return stops.front().color;
  if (v >= stops.back().value) return stops.back().color;
  for (std::size_t i = 1; i < stops.size(); ++i) {
    if (v <= stops[i].value) {
      const ColorStop& a = stops[i - 1];
      const ColorStop& b = stops[i];
      return clamp01(lerp(a.color, b.color, (v - a.value) / (b.value - a.value)));
    }
  }
  return stops.back().color;
}

void check_stops(const std::vector<ColorStop>& stops, const char* name) {
  if (stops.size() < 2) fail(ErrorCode::ConfigError, std::string(name) + " needs at least two stops");
  for (std::size_t i = 0; i < stops.size(); ++i) {
    const Color& c = stops[i].color;
    for (double x : {c.r, c.g, c.b})
      if (!(x >= 0.0 && x <= 1.0)) fail(ErrorCode::ConfigError, std::string(name) + " color outside [0,1]");
    if (i > 0 && !(stops[i].value > stops[i - 1].value))
      fail(ErrorCode::ConfigError, std::string(name) + " stops must increase");
  }
}

Color color_from(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) fail(ErrorCode::ConfigError, "color must have three components");
  return {v[0], v[1], v[2]};
}

std::vector<ColorStop> stops_from(const nlohmann::json& j) {
  std::vector<ColorStop> out;
  for (const auto& s : j) out.push_back({s.at("value").get<double>(), color_from(s.at("color"))});
  return out;
}

}  // namespace

double relative_luminance(const Color& c) { return 0.2126 * c.r + 0.7152 * c.g + 0.0722 * c.b; }

MapperConfig::MapperConfig()
    : uv_stops{{0.0, {0.0, 0.8, 0.0}},
               {3.0, {1.0, 0.8, 0.0}},
               {6.0, {1.0, 0.5, 0.0}},
               {8.0, {1.0, 0.0, 0.0}},
               {11.0, {0.6, 0.0, 0.8}}},
      pm25_stops{{0.0, {0.7, 0.9, 0.6}},
                 {50.0, {0.78, 0.85, 0.55}},
                 {100.0, {0.85, 0.78, 0.5}},
                 {150.0, {0.82, 0.7, 0.45}},
                 {200.0, {0.7, 0.55, 0.35}},
                 {300.0, {0.5, 0.35, 0.2}},
                 {500.0, {0.2, 0.1, 0.05}}} {}

void MapperConfig::validate() const {
  check_stops(uv_stops, "uv");
  check_stops(pm25_stops, "pm25");
  if (!(temp_max > temp_min)) fail(ErrorCode::ConfigError, "temp_max must exceed temp_min");
  if (!(rain_cap > 0.0)) fail(ErrorCode::ConfigError, "rain_cap must be positive");
  if (!(baseline_density >= 0.0 && baseline_density <= 1.0))
    fail(ErrorCode::ConfigError, "baseline_density outside [0,1]");
  for (const Color& c : {temp_cold, temp_hot, rain_color})
    for (double x : {c.r, c.g, c.b})
      if (!(x >= 0.0 && x <= 1.0)) fail(ErrorCode::ConfigError, "color outside [0,1]");
}

MapperConfig MapperConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ConfigError, "cannot read " + path.string());
  MapperConfig cfg;
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.contains("uv_stops")) cfg.uv_stops = stops_from(j.at("uv_stops"));
    if (j.contains("pm25_stops")) cfg.pm25_stops = stops_from(j.at("pm25_stops"));
    if (j.contains("temperature")) {
      const auto& t = j.at("temperature");
      cfg.temp_min = t.at("min_c").get<double>();
      cfg.temp_max = t.at("max_c").get<double>();
      cfg.temp_cold = color_from(t.at("cold"));
      cfg.temp_hot = color_from(t.at("hot"));
    }
    if (j.contains("rainfall")) {
      const auto& r = j.at("rainfall");
      cfg.rain_cap = r.at("cap_mm_hr").get<double>();
      cfg.rain_color = color_from(r.at("sphere_color"));
    }
    if (j.contains("baseline_density")) cfg.baseline_density = j.at("baseline_density").get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
  cfg.validate();
  return cfg;
}

Color uv_to_color(double uv, const MapperConfig& cfg) {
  if (!(uv >= 0.0)) fail(ErrorCode::NegativeInput, "uv index must be >= 0");
  return ramp(cfg.uv_stops, uv);
}

TemperatureVisual temp_to_visual(double t, const MapperConfig& cfg) {
  if (!std::isfinite(t)) fail(ErrorCode::OutOfRange, "temperature must be finite");
  const double s = std::clamp((t - cfg.temp_min) / (cfg.temp_max - cfg.temp_min), 0.0, 1.0);
  return {clamp01(lerp(cfg.temp_cold, cfg.temp_hot, s)), 1.0 - s};
}

Color pm25_to_color(double aqi, const MapperConfig& cfg) {
  if (!(aqi >= cfg.pm25_stops.front().value && aqi <= cfg.pm25_stops.back().value))
    fail(ErrorCode::OutOfRange, "aqi outside the ramp");
  return ramp(cfg.pm25_stops, aqi);
}

double rainfall_to_density(double rain, const MapperConfig& cfg) {
  if (!(rain >= 0.0)) fail(ErrorCode::NegativeInput, "rainfall must be >= 0");
  return std::clamp(rain / cfg.rain_cap, 0.0, 1.0);
}

std::string_view metric_unit(Metric m) {
  switch (m) {
    case Metric::UV:
      return "UVI";
    case Metric::Temperature:
      return "°C";
    case Metric::PM25:
      return "AQI";
    case Metric::Rainfall:
      return "mm/hr";
  }
  return "";
}

SceneSpec build_scene(const WeatherRecord& record, Metric metric, const MapperConfig& cfg) {
  const std::optional<double> value = record.value(metric);
  if (!value)
    fail(ErrorCode::NoDataYet, "no " + std::string(to_string(metric)) + " reading for '" + record.city + "'");

  SceneSpec s;
  s.city = record.city;
  s.metric = metric;
  s.timestamp = record.timestamp;
  s.particle_density = cfg.baseline_density;
  switch (metric) {
    case Metric::UV:
      s.sphere_color = uv_to_color(*value, cfg);
      break;
    case Metric::Temperature: {
      const TemperatureVisual tv = temp_to_visual(*value, cfg);
      s.sphere_color = tv.color;
      s.convection_intensity = tv.convection_intensity;
      break;
    }
    case Metric::PM25:
      s.sphere_color = pm25_to_color(*value, cfg);
      break;
    case Metric::Rainfall:
      s.sphere_color = cfg.rain_color;
      s.particle_density = rainfall_to_density(*value, cfg);
      break;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", *value);
  std::string shown = buf;
  if (shown == "-0.0") shown = "0.0";
  s.pin_label = record.city + ": " + shown + " " + std::string(metric_unit(metric));
  return s;
}

}  // namespace skyanchor
