#include <doctest.h>

#include <atomic>
#include <random>
#include <thread>

#include "skyanchor/error.hpp"
#include "skyanchor/weather.hpp"
#include "support/fs.hpp"

using namespace skyanchor;
using namespace skyanchor::testing;

namespace {

const CityRegistry& cities() {
  static const CityRegistry r = CityRegistry::load(kData / "cities.json");
  return r;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::IoError;
}

WeatherRecord full(const std::string& city, std::int64_t ts, double v) {
  return WeatherRecord{city, ts, v, v, v, v};
}

}  // namespace

TEST_CASE("metric names") {
  for (Metric m : kAllMetrics) CHECK(metric_from_string(to_string(m)) == m);
  CHECK(code_of([] { metric_from_string("wind"); }) == ErrorCode::UnknownMetric);
}

TEST_CASE("record json") {
  SUBCASE("canonical text") {
    const WeatherRecord r{"Tainan", 1700000000, 3.5, -2.25, 150.0, std::nullopt};
    CHECK(to_json(r) ==
          R"({"city":"Tainan","timestamp":1700000000,"uv_index":3.5,"temperature_c":-2.25,"pm25_aqi":150.0,"rainfall_mm_hr":null})");
  }
  SUBCASE("round trip over random records") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<std::int64_t> ts(0, 4'000'000'000);
    const auto& names = cities().cities();
    for (int i = 0; i < 2000; ++i) {
      WeatherRecord r;
      r.city = names[static_cast<std::size_t>(i) % names.size()].name;
      r.timestamp = ts(rng);
      if (u(rng) < 0.9) r.uv_index = 15.0 * u(rng);
      if (u(rng) < 0.9) r.temperature_c = -30.0 + 80.0 * u(rng);
      if (u(rng) < 0.9) r.pm25_aqi = 500.0 * u(rng);
      if (u(rng) < 0.9) r.rainfall_mm_hr = 200.0 * u(rng);
      CHECK(record_from_json(to_json(r)) == r);
    }
  }
  SUBCASE("errors") {
    CHECK(code_of([] {
            record_from_json(R"({"city":"Taipei","timestamp":1,"uv_index":1,"temperature_c":1,"pm25_aqi":-1,"rainfall_mm_hr":0})");
          }) == ErrorCode::InvariantViolation);
    CHECK(code_of([] { record_from_json(R"({"city":"Taipei","timestamp":1,"pm25_aqi":600})"); }) ==
          ErrorCode::InvariantViolation);
    CHECK(code_of([] { record_from_json(R"({"city":"Taipei","timestamp":1,"uv_index":-0.5})"); }) ==
          ErrorCode::InvariantViolation);
    CHECK(code_of([] { record_from_json("{\"city\":"); }) == ErrorCode::ParseError);
    CHECK(code_of([] { record_from_json(R"({"city":"Taipei","timestamp":"now"})"); }) == ErrorCode::ParseError);
    CHECK(code_of([] { record_from_json(R"({"city":"Taipei","timestamp":1,"uv_index":"high"})"); }) ==
          ErrorCode::ParseError);
    CHECK(code_of([] { record_from_json(R"([1,2])"); }) == ErrorCode::ParseError);
  }
}

TEST_CASE("city registry") {
  CHECK(cities().cities().size() == 22);
  for (const City& c : cities().cities()) {
    CHECK(c.map_x >= 0.0);
    CHECK(c.map_x <= 1.0);
    CHECK(c.map_y >= 0.0);
    CHECK(c.map_y <= 1.0);
  }
  CHECK(cities().canonical("Kaohsiung City") == "Kaohsiung");
  CHECK_FALSE(cities().contains("Atlantis"));
  CHECK(CityRegistry::load(write_temp("empty_cities.json", "[]")).cities().empty());
  CHECK(code_of([] { CityRegistry::load(write_temp("bad_cities.json", "[{\"name\": 3}]")); }) ==
        ErrorCode::ConfigError);
  CHECK(code_of([] { CityRegistry::load(write_temp("dup_cities.json",
                                                   R"([{"name":"A","map_x":0,"map_y":0},{"name":"A","map_x":0,"map_y":0}])")); }) ==
        ErrorCode::ConfigError);
  CHECK(code_of([] { CityRegistry::load("/nonexistent/cities.json"); }) == ErrorCode::ConfigError);
}

TEST_CASE("pm2.5 AQI table") {
  const AqiTable shipped = AqiTable::load(kData / "config" / "aqi_breakpoints.json");
  const AqiTable builtin = AqiTable::epa2012();
  REQUIRE(shipped.rows().size() == builtin.rows().size());
  // Oracle: the published interpolation written out per band.
  auto oracle = [](double c) {
    struct B {
      double cl, ch, il, ih;
    };
    const B bands[] = {{0, 12, 0, 50},          {12.1, 35.4, 51, 100},   {35.5, 55.4, 101, 150},
                       {55.5, 150.4, 151, 200}, {150.5, 250.4, 201, 300}, {250.5, 350.4, 301, 400},
                       {350.5, 500.4, 401, 500}};
    const double t = std::trunc(c * 10.0 + 1e-9) / 10.0;
    for (const B& b : bands)
      if (t >= b.cl - 1e-9 && t <= b.ch + 1e-9) return std::round((b.ih - b.il) / (b.ch - b.cl) * (t - b.cl) + b.il);
    return 500.0;
  };
  for (double c = 0.0; c <= 520.0; c += 0.05) {
    CHECK(shipped.aqi(c) == oracle(c));
    CHECK(builtin.aqi(c) == shipped.aqi(c));
  }
  CHECK(shipped.aqi(0.0) == 0.0);
  CHECK(shipped.aqi(12.0) == 50.0);
  CHECK(shipped.aqi(12.05) == 50.0);
  CHECK(shipped.aqi(12.1) == 51.0);
  CHECK(shipped.aqi(35.4) == 100.0);
  CHECK(shipped.aqi(500.4) == 500.0);
  CHECK(shipped.aqi(900.0) == 500.0);
  CHECK(code_of([&] { shipped.aqi(-1.0); }) == ErrorCode::InvariantViolation);
  CHECK(code_of([] { AqiTable({{0, 10, 0, 50}, {5, 20, 51, 100}}); }) == ErrorCode::ConfigError);
}

TEST_CASE("source adapters") {
  const AqiTable aqi = AqiTable::epa2012();
  SUBCASE("three-city fixtures") {
    const ParsedPayload cwb = parse_cwb(slurp(kData / "fixtures" / "cwb_three_cities.json"), cities());
    REQUIRE(cwb.records.size() == 3);
    CHECK(cwb.dropped == 1);
    CHECK(cwb.records[0].city == "Taipei");
    CHECK(cwb.records[0].uv_index == 0.0);
    CHECK(cwb.records[0].temperature_c == 24.5);
    CHECK(cwb.records[1].city == "Kaohsiung");
    CHECK_FALSE(cwb.records[1].rainfall_mm_hr.has_value());
    CHECK_FALSE(cwb.records[2].rainfall_mm_hr.has_value());
    for (const auto& r : cwb.records) CHECK_FALSE(r.pm25_aqi.has_value());

    const ParsedPayload epa = parse_epa(slurp(kData / "fixtures" / "epa_three_cities.json"), cities(), aqi);
    REQUIRE(epa.records.size() == 3);
    CHECK(epa.records[0].pm25_aqi == 51.0);
    CHECK(epa.records[1].pm25_aqi == 112.0);
    CHECK_FALSE(epa.records[2].pm25_aqi.has_value());
  }
  SUBCASE("full fixtures cover every city") {
    const ParsedPayload cwb = parse_cwb(slurp(kData / "fixtures" / "cwb_observations.json"), cities());
    const ParsedPayload epa = parse_epa(slurp(kData / "fixtures" / "epa_pm25.json"), cities(), aqi);
    CHECK(cwb.records.size() == 22);
    CHECK(epa.records.size() == 22);
    CHECK(cwb.dropped == 0);
  }
  SUBCASE("empty and malformed payloads") {
    CHECK(parse_cwb(R"({"observations":[]})", cities()).records.empty());
    CHECK(parse_epa(R"({"records":[]})", cities(), aqi).records.empty());
    CHECK(code_of([&] { parse_cwb(R"({"stations":[]})", cities()); }) == ErrorCode::SchemaError);
    CHECK(code_of([&] { parse_epa(R"({"records":{}})", cities(), aqi); }) == ErrorCode::SchemaError);
    CHECK(code_of([&] { parse_cwb("<html>", cities()); }) == ErrorCode::SchemaError);
    CHECK(code_of([&] { parse_cwb(R"({"observations":[{"station":"Taipei"}]})", cities()); }) ==
          ErrorCode::SchemaError);
    CHECK(code_of([&] {
            parse_cwb(R"({"observations":[{"station":"Taipei","obs_time":1,"uv_index":"x"}]})", cities());
          }) == ErrorCode::SchemaError);
    CHECK(code_of([&] {
            parse_cwb(R"({"observations":[{"station":"Taipei","obs_time":1,"uv_index":-2}]})", cities());
          }) == ErrorCode::SchemaError);
    CHECK(code_of([&] {
            parse_epa(R"({"records":[{"county":"Taipei","timestamp":1,"pm25_ugm3":-2}]})", cities(), aqi);
          }) == ErrorCode::SchemaError);
  }
}

TEST_CASE("weather store") {
  const AqiTable aqi = AqiTable::load(kData / "config" / "aqi_breakpoints.json");
  SUBCASE("fixture record matches the golden text") {
    WeatherStore store(cities());
    store.ingest(parse_cwb(slurp(kData / "fixtures" / "cwb_three_cities.json"), cities()).records);
    store.ingest(parse_epa(slurp(kData / "fixtures" / "epa_three_cities.json"), cities(), aqi).records);
    CHECK(to_json(store.latest("Taipei")) == slurp(kData / "golden" / "weather_record_taipei.json"));
  }
  SUBCASE("lookup errors") {
    WeatherStore store(cities());
    CHECK(code_of([&] { store.latest("Atlantis"); }) == ErrorCode::UnknownCity);
    CHECK(code_of([&] { store.latest("Taipei"); }) == ErrorCode::NoDataYet);
    CHECK(code_of([&] { store.ingest({full("Atlantis", 1, 1.0)}); }) == ErrorCode::UnknownCity);
    WeatherRecord bad = full("Taipei", 1, 1.0);
    bad.pm25_aqi = 700.0;
    CHECK(code_of([&] { store.ingest({bad}); }) == ErrorCode::InvariantViolation);
    CHECK(code_of([&] { store.latest("Taipei"); }) == ErrorCode::NoDataYet);
  }
  SUBCASE("dedupe, ordering and partial merge") {
    WeatherStore store(cities());
    CHECK(store.ingest({full("Taipei", 100, 1.0)}) == 1);
    const auto v = store.version();
    CHECK(store.ingest({full("Taipei", 100, 1.0)}) == 0);
    CHECK(store.version() == v);
    CHECK(store.ingest({full("Taipei", 50, 9.0)}) == 0);
    CHECK(store.latest("Taipei").uv_index == 1.0);

    WeatherRecord uv_only{"Taipei", 200, 4.0, std::nullopt, std::nullopt, std::nullopt};
    CHECK(store.ingest({uv_only}) == 1);
    const WeatherRecord now = store.latest("Taipei");
    CHECK(now.timestamp == 200);
    CHECK(now.uv_index == 4.0);
    CHECK(now.temperature_c == 1.0);

    // a late reading for another metric still lands, timestamp stays maximal
    WeatherRecord temp_late{"Taipei", 150, std::nullopt, 30.0, std::nullopt, std::nullopt};
    CHECK(store.ingest({temp_late}) == 1);
    CHECK(store.latest("Taipei").temperature_c == 30.0);
    CHECK(store.latest("Taipei").timestamp == 200);
    CHECK(store.latest("Taipei City").city == "Taipei");
  }
  SUBCASE("latest timestamp never decreases") {
    WeatherStore store(cities(), 16);
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::int64_t> ts(0, 1000);
    std::map<std::string, std::int64_t> max_seen;
    for (int i = 0; i < 3000; ++i) {
      const std::string& c = cities().cities()[static_cast<std::size_t>(i) % 5].name;
      const std::int64_t t = ts(rng);
      store.ingest({full(c, t, static_cast<double>(i % 10))});
      max_seen[c] = std::max(max_seen[c], t);
      CHECK(store.latest(c).timestamp == max_seen[c]);
    }
    CHECK(store.history().size() == 16);
  }
  SUBCASE("readers never see a torn record") {
    WeatherStore store(cities());
    store.ingest({full("Taipei", 0, 0.0)});
    std::atomic<bool> done{false};
    std::atomic<int> torn{0};
    std::vector<std::thread> readers;
    for (int t = 0; t < 3; ++t) {
      readers.emplace_back([&] {
        while (!done.load()) {
          const WeatherRecord r = store.latest("Taipei");
          const double v = static_cast<double>(r.timestamp);
          if (r.uv_index != v || r.temperature_c != v || r.pm25_aqi != v || r.rainfall_mm_hr != v) ++torn;
        }
      });
    }
    for (int i = 1; i <= 400; ++i) store.ingest({full("Taipei", i, static_cast<double>(i))});
    done = true;
    for (auto& th : readers) th.join();
    CHECK(torn.load() == 0);
  }
}
