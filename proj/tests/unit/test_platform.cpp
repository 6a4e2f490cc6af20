#include <doctest.h>

#include <httplib.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "../support/test_support.hpp"
#include "twinbridge/codec.hpp"
#include "twinbridge/http_service.hpp"
#include "twinbridge/platform.hpp"
#include "twinbridge/scenario.hpp"

using namespace twinbridge;
using tbtest::fan;
using tbtest::iaq;
using tbtest::weather;

namespace {

std::shared_ptr<ManualClock> manual() { return std::make_shared<ManualClock>(1'700'000'000'000); }

}  // namespace

TEST_SUITE("platform") {

TEST_CASE("ingest and query latest") {
  auto clock = manual();
  Platform p(PlatformConfig{}, clock);
  auto r = iaq("iaq-01", clock->now_ms());
  auto res = p.ingest(r);
  CHECK(res.accepted);
  CHECK(res.received_ms == clock->now_ms());
  CHECK(p.query_latest("iaq-01") == r);

  res = p.ingest(iaq("ghost-1", 1));
  CHECK_FALSE(res.accepted);
  REQUIRE(res.rejection);
  CHECK(res.rejection->code == ErrorCode::UnknownDevice);

  CHECK_THROWS_WITH_AS(p.query_latest("fan-01"), doctest::Contains("NO_DATA"), Error);
  CHECK_THROWS_WITH_AS(p.query_latest("ghost-1"), doctest::Contains("UNKNOWN_DEVICE"), Error);
}

TEST_CASE("out-of-order arrival keeps the newest reading") {
  Platform p(PlatformConfig{}, manual());
  auto t1 = fan("fan-01", 1000, 100), t2 = fan("fan-01", 2000, 200);
  p.ingest(t2);
  p.ingest(t1);
  CHECK(p.query_latest("fan-01") == t2);
  CHECK(p.store().history("fan-01").size() == 2);
}

TEST_CASE("latest matches a brute-force scan of history") {
  PlatformConfig cfg;
  cfg.history_capacity = 100000;
  Platform p(cfg, manual());
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<TimestampMs> ts(0, 1'000'000);
  std::uniform_int_distribution<int> dev(1, 4);
  for (int i = 0; i < 5000; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "fan-%02d", dev(rng));
    p.ingest(fan(id, ts(rng), static_cast<double>(i)));
  }
  for (int d = 1; d <= 4; ++d) {
    char id[16];
    std::snprintf(id, sizeof id, "fan-%02d", d);
    auto hist = p.store().history(id);
    REQUIRE_FALSE(hist.empty());
    // Ties go to the later arrival, so scan for the last maximum.
    const SensorReading* best = &hist.front();
    for (const auto& r : hist)
      if (r.timestamp_ms >= best->timestamp_ms) best = &r;
    CHECK(p.query_latest(id) == *best);
  }
}

TEST_CASE("concurrent ingest never tears a reading") {
  Platform p(PlatformConfig{}, manual());
  std::atomic<bool> stop{false};
  std::vector<std::thread> writers;
  for (int w = 0; w < 4; ++w) {
    writers.emplace_back([&, w] {
      for (int i = 0; i < 2000; ++i) {
        double v = w * 10000 + i;
        p.ingest(iaq("iaq-01", i, 20.0, v, v));
      }
    });
  }
  std::thread reader([&] {
    while (!stop) {
      try {
        auto r = p.query_latest("iaq-01");
        const auto& pl = std::get<IaqPayload>(r.payload);
        CHECK(pl.pm25_ugm3 == pl.co2_ppm);
      } catch (const Error&) {
      }
    }
  });
  for (auto& t : writers) t.join();
  stop = true;
  reader.join();
}

TEST_CASE("zone snapshot and staleness") {
  auto clock = manual();
  Platform p(PlatformConfig{}, clock);
  const auto now = clock->now_ms();
  p.ingest(iaq("iaq-01", now));
  p.ingest(iaq("iaq-02", now - 120'000));
  auto snap = p.query_zone("kpark");
  CHECK(snap.readings.size() == 2);
  CHECK(snap.stale.at("iaq-01") == false);
  CHECK(snap.stale.at("iaq-02") == true);
  for (const auto& [id, r] : snap.readings) CHECK(snap.as_of_ms >= r.timestamp_ms);
  CHECK_THROWS_WITH_AS(p.query_zone("atlantis"), doctest::Contains("UNKNOWN_ZONE"), Error);
  CHECK(p.query_zone("rooftop").readings.empty());
}

TEST_CASE("snapshot as_of never predates a future-stamped reading") {
  auto clock = manual();
  Platform p(PlatformConfig{}, clock);
  p.ingest(fan("fan-01", clock->now_ms() + 5000));
  auto snap = p.query_zone("kpark");
  CHECK(snap.as_of_ms == clock->now_ms() + 5000);
}

TEST_CASE("persistence replays accepted readings") {
  auto path = tbtest::temp_path("persist") + ".jsonl";
  PlatformConfig cfg;
  cfg.persist_path = path;
  auto r = weather("weather-01", 123456, 4.2, 55);
  {
    Platform p(cfg, manual());
    p.ingest(r);
    p.ingest(weather("weather-01", 1, -3, 55));  // rejected, not persisted
  }
  Platform again(cfg, manual());
  CHECK(again.query_latest("weather-01") == r);
  std::remove(path.c_str());
}

TEST_CASE("http api") {
  auto platform = std::make_shared<Platform>(PlatformConfig{});
  PlatformServer server(platform);
  server.start("127.0.0.1", 0);
  const auto base = server.base_url();

  auto r = iaq("iaq-03", platform->clock().now_ms(), 30.2, 12, 650);
  auto res = http_post_json(base, "/api/v1/ingest", reading_to_json(r), std::chrono::seconds(5));
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->body["status"] == "accepted");
  CHECK(res->body["received_ms"].is_number_integer());

  res = http_post_json(base, "/api/v1/ingest", reading_to_json(iaq("ghost-1", 1)), std::chrono::seconds(5));
  REQUIRE(res);
  CHECK(res->body["status"] == "rejected");
  CHECK(res->body["reason"] == "UNKNOWN_DEVICE");

  httplib::Client cli(base);
  auto bad = cli.Post("/api/v1/ingest", "{oops", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  CHECK(parse_json(bad->body)["reason"] == "MALFORMED_JSON");

  auto missing = cli.Post("/api/v1/ingest", "{}", "application/json");
  REQUIRE(missing);
  CHECK(parse_json(missing->body)["reason"] == "MISSING_FIELD");

  res = http_get_json(base, "/api/v1/devices", std::chrono::seconds(5));
  REQUIRE(res);
  CHECK(res->body.size() == 16);

  res = http_get_json(base, "/api/v1/devices/iaq-03/latest", std::chrono::seconds(5));
  REQUIRE(res);
  CHECK(reading_from_json(res->body) == r);

  auto latest = cli.Get("/api/v1/devices/iaq-03/latest");
  REQUIRE(latest);
  CHECK(latest->has_header("X-Served-Ms"));

  res = http_get_json(base, "/api/v1/devices/fan-02/latest", std::chrono::seconds(5));
  REQUIRE(res);
  CHECK(res->status == 404);
  CHECK(res->body["reason"] == "NO_DATA");

  res = http_get_json(base, "/api/v1/zones/kpark/snapshot", std::chrono::seconds(5));
  REQUIRE(res);
  CHECK(snapshot_from_json(res->body).readings.count("iaq-03") == 1);

  res = http_get_json(base, "/api/v1/zones/atlantis/snapshot", std::chrono::seconds(5));
  REQUIRE(res);
  CHECK(res->status == 404);
  CHECK(res->body["reason"] == "UNKNOWN_ZONE");

  auto c = server.counters();
  CHECK(c.ingest == 4);
  CHECK(c.latest == 3);
  CHECK(c.snapshot == 2);
  server.stop();
}

TEST_CASE("binding a used port reports PORT_IN_USE") {
  auto platform = std::make_shared<Platform>(PlatformConfig{});
  PlatformServer a(platform), b(platform);
  a.start("127.0.0.1", 0);
  CHECK_THROWS_WITH_AS(b.start("127.0.0.1", a.port()), doctest::Contains("PORT_IN_USE"), Error);
}

TEST_CASE("platform config json round-trip") {
  PlatformConfig cfg;
  cfg.port = 9001;
  cfg.staleness_threshold_ms = 30'000;
  auto back = platform_config_from_json(platform_config_to_json(cfg));
  CHECK(back.port == 9001);
  CHECK(back.staleness_threshold_ms == 30'000);
  CHECK(back.registry.size() == 16);
}

}

TEST_SUITE("scenario") {

TEST_CASE("constant generator") {
  DeviceScenario s{"iaq-01", DeviceKind::Iaq,
                   {{"temperature_c", {25.0, 0, 60, 0}}, {"pm25_ugm3", {12, 0, 60, 0}}, {"co2_ppm", {650, 0, 60, 0}}}};
  DeviceGenerator g(s, 5.0, 42, 0, 1000);
  auto a = g.next(), b = g.next();
  CHECK(std::get<IaqPayload>(a.payload).temperature_c == 25.0);
  CHECK(std::get<IaqPayload>(b.payload).temperature_c == 25.0);
  CHECK(a.timestamp_ms == 1000);
  CHECK(b.timestamp_ms == 6000);
}

TEST_CASE("same seed, same sequence") {
  auto cfg = ScenarioConfig::defaults_for(Registry::default_topology(), 42);
  ScenarioGenerator a(cfg, 0), b(cfg, 0);
  for (int i = 0; i < 20; ++i) CHECK(a.emit_next() == b.emit_next());
  auto other = cfg;
  other.seed = 43;
  ScenarioGenerator c(cfg, 0), d(other, 0);
  CHECK(c.emit_next() != d.emit_next());
}

TEST_CASE("sinusoid at a quarter period") {
  GeneratorSpec spec{28.0, 2.0, 60.0, 0.0};
  CHECK(generator_mean(spec, 15.0) == doctest::Approx(28.0 + 2.0 * std::sin(M_PI / 2)).epsilon(1e-12));
  DeviceScenario s{"iaq-01", DeviceKind::Iaq,
                   {{"temperature_c", spec}, {"pm25_ugm3", {12, 0, 60, 0}}, {"co2_ppm", {650, 0, 60, 0}}}};
  DeviceGenerator g(s, 15.0, 42, 0, 0);
  g.next();
  CHECK(std::get<IaqPayload>(g.next().payload).temperature_c == doctest::Approx(30.0).epsilon(1e-9));

  spec.jitter_std = 0.2;
  s.quantities["temperature_c"] = spec;
  DeviceGenerator jittered(s, 15.0, 42, 0, 0);
  jittered.next();
  CHECK(std::abs(std::get<IaqPayload>(jittered.next().payload).temperature_c - 30.0) < 5 * 0.2);
}

TEST_CASE("generated readings pass validation") {
  auto reg = Registry::default_topology();
  ScenarioGenerator g(ScenarioConfig::defaults_for(reg, 7), 0);
  for (int i = 0; i < 200; ++i)
    for (const auto& r : g.emit_next()) CHECK_FALSE(validate_reading(r, reg));
}

TEST_CASE("invalid scenario configs") {
  auto cfg = ScenarioConfig::defaults_for(Registry::default_topology());
  cfg.interval_s = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = ScenarioConfig::defaults_for(Registry::default_topology());
  cfg.devices[0].quantities.begin()->second.period_s = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = ScenarioConfig::defaults_for(Registry::default_topology());
  cfg.devices[0].quantities.erase(cfg.devices[0].quantities.begin());
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("scenario config json round-trip") {
  auto reg = Registry::default_topology();
  auto cfg = ScenarioConfig::defaults_for(reg, 5);
  auto j = scenario_config_to_json(cfg);
  CHECK(scenario_config_to_json(scenario_config_from_json(j, reg)) == j);
}

TEST_CASE("runner feeds a live platform") {
  auto platform = std::make_shared<Platform>(PlatformConfig{});
  PlatformServer server(platform);
  server.start("127.0.0.1", 0);
  auto cfg = ScenarioConfig::defaults_for(platform->registry(), 42);
  cfg.interval_s = 0.2;
  ScenarioRunner runner(cfg, http_ingest_sink(server.base_url()));
  runner.start();
  std::this_thread::sleep_for(std::chrono::milliseconds(700));
  runner.stop();
  CHECK(runner.delivered() >= 16);
  CHECK(runner.failures() == 0);
  CHECK_NOTHROW(platform->query_latest("weather-01"));
}

}
