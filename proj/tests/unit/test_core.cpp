#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "../support/test_support.hpp"
#include "twinbridge/clock.hpp"
#include "twinbridge/codec.hpp"
#include "twinbridge/delay.hpp"

using namespace twinbridge;
using tbtest::fan;
using tbtest::iaq;
using tbtest::weather;

TEST_SUITE("core") {

TEST_CASE("default registry is 11 iaq, 4 fan, 1 weather") {
  auto reg = Registry::default_topology();
  CHECK(reg.count(DeviceKind::Iaq) == 11);
  CHECK(reg.count(DeviceKind::Fan) == 4);
  CHECK(reg.count(DeviceKind::Weather) == 1);
  CHECK(reg.size() == 16);
  CHECK(reg.zones() == std::vector<std::string>{"kpark", "rooftop"});
  CHECK(reg.zone_devices("kpark").size() == 15);
}

TEST_CASE("registry rejects duplicate and empty ids") {
  Registry reg;
  reg.add({"a", DeviceKind::Fan, "z", ""});
  CHECK_THROWS_AS(reg.add({"a", DeviceKind::Iaq, "z", ""}), Error);
  CHECK_THROWS_AS(reg.add({"", DeviceKind::Iaq, "z", ""}), Error);
  CHECK_THROWS_AS(reg.add({"b", DeviceKind::Iaq, "", ""}), Error);
}

TEST_CASE("validate_reading") {
  auto reg = Registry::default_topology();
  CHECK_FALSE(validate_reading(iaq("iaq-01", 1, 30.2, 12, 650), reg));

  auto r = validate_reading(fan("weather-01", 1, 100), reg);
  REQUIRE(r);
  CHECK(r->code == ErrorCode::KindMismatch);

  r = validate_reading(weather("weather-01", 1, -1.0, 50), reg);
  REQUIRE(r);
  CHECK(r->code == ErrorCode::OutOfRange);
  CHECK(r->field == "wind_mps");

  r = validate_reading(iaq("ghost-1", 1), reg);
  REQUIRE(r);
  CHECK(r->code == ErrorCode::UnknownDevice);

  r = validate_reading(weather("weather-01", 1, 3.0, 101.0), reg);
  REQUIRE(r);
  CHECK(r->field == "humidity_pct");

  r = validate_reading(iaq("iaq-01", 1, std::numeric_limits<double>::quiet_NaN()), reg);
  REQUIRE(r);
  CHECK(r->code == ErrorCode::OutOfRange);
  CHECK(r->field == "temperature_c");

  r = validate_reading(fan("fan-01", 1, -0.5), reg);
  REQUIRE(r);
  CHECK(r->field == "fan_rpm");
}

TEST_CASE("staleness threshold is exclusive") {
  CHECK_FALSE(is_stale(60'000, 0, 60'000));
  CHECK(is_stale(60'001, 0, 60'000));
}

TEST_CASE("make_snapshot raises as_of to newest reading") {
  auto snap = make_snapshot("kpark", 100, {iaq("iaq-01", 500), fan("fan-01", 50)}, 60'000);
  CHECK(snap.as_of_ms == 500);
  CHECK(snap.stale.at("iaq-01") == false);
  CHECK(snap.stale.at("fan-01") == false);
  for (const auto& [id, r] : snap.readings) CHECK(snap.as_of_ms >= r.timestamp_ms);
}

TEST_CASE("error codes round-trip through their wire tokens") {
  for (int i = 0; i <= static_cast<int>(ErrorCode::Unreachable); ++i) {
    auto code = static_cast<ErrorCode>(i);
    auto back = error_code_from_string(to_string(code));
    REQUIRE(back);
    CHECK(*back == code);
  }
  Error e(ErrorCode::MissingField, "device_id");
  CHECK(std::string(e.what()) == "MISSING_FIELD(device_id)");
}

TEST_CASE("quantize is idempotent") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1e5, 1e5);
  for (int i = 0; i < 10000; ++i) {
    double q = quantize(u(rng));
    CHECK(quantize(q) == q);
  }
}

TEST_CASE("iso-8601 parsing") {
  CHECK(parse_iso8601("1970-01-01T00:00:00Z") == 0);
  CHECK(parse_iso8601("2023-11-14T22:13:20.000Z") == 1'700'000'000'000);
  CHECK(parse_iso8601("2023-11-15T00:13:20+02:00") == 1'700'000'000'000);
  CHECK(parse_iso8601("2023-11-14T22:13:20.5Z") == 1'700'000'000'500);
  CHECK_FALSE(parse_iso8601("2023-11-14T22:13:20"));
  CHECK_FALSE(parse_iso8601("yesterday"));
  CHECK(format_iso8601(1'700'000'000'000) == "2023-11-14T22:13:20.000Z");
  CHECK(parse_iso8601(format_iso8601(1'712'345'678'901)) == 1'712'345'678'901);
}

TEST_CASE("reading round-trip over random valid readings") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  std::uniform_int_distribution<TimestampMs> ts(0, 4'000'000'000'000);
  for (int i = 0; i < 2000; ++i) {
    SensorReading r;
    switch (i % 3) {
      case 0: r = iaq("iaq-01", ts(rng), quantize(u(rng) - 20), quantize(u(rng)), quantize(u(rng) * 20)); break;
      case 1: r = fan("fan-02", ts(rng), quantize(u(rng) * 5)); break;
      default: r = weather("weather-01", ts(rng), quantize(u(rng) / 4), quantize(u(rng))); break;
    }
    CHECK(deserialize_reading(serialize_reading(r)) == r);
  }
}

TEST_CASE("decoding errors name the field") {
  try {
    deserialize_reading("{}");
    FAIL("expected MISSING_FIELD");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingField);
    CHECK(e.detail() == "device_id");
  }
  try {
    deserialize_reading(R"({"device_id": "fan-01", "timestamp_ms": "soon", "kind": "fan", "payload": {"fan_rpm": 1}})");
    FAIL("expected BAD_TYPE");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BadType);
    CHECK(e.detail() == "timestamp_ms");
  }
  try {
    deserialize_reading(R"({"device_id": "fan-01", "timestamp_ms": 5, "kind": "fan", "payload": {}})");
    FAIL("expected MISSING_FIELD");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingField);
    CHECK(e.detail() == "fan_rpm");
  }
  CHECK_THROWS_WITH_AS(deserialize_reading("{not json"), doctest::Contains("MALFORMED_JSON"), Error);
}

TEST_CASE("extra fields are ignored") {
  auto r = deserialize_reading(
      R"({"device_id":"fan-01","timestamp_ms":5,"kind":"fan","payload":{"fan_rpm":120,"x":1},"debug":true})");
  CHECK(r == fan("fan-01", 5, 120));
  CHECK(serialize_reading(r).find("debug") == std::string::npos);
}

TEST_CASE("iso timestamps are accepted on input") {
  auto r = deserialize_reading(
      R"({"device_id":"fan-01","timestamp":"2023-11-14T22:13:20Z","kind":"fan","payload":{"fan_rpm":120}})");
  CHECK(r.timestamp_ms == 1'700'000'000'000);
}

TEST_CASE("snapshot json round-trip") {
  auto snap = make_snapshot("kpark", 200'000, {iaq("iaq-01", 199'000), fan("fan-01", 10'000)}, 60'000);
  CHECK(snap.stale.at("fan-01"));
  CHECK(snapshot_from_json(snapshot_to_json(snap)) == snap);
}

TEST_CASE("delay sampler is reproducible and non-negative") {
  auto spec = DelaySpec::truncated_normal(306, 174);
  DelaySampler a(spec, 42), b(spec, 42);
  for (int i = 0; i < 5000; ++i) {
    double x = a.sample_ms();
    CHECK(x >= 0.0);
    CHECK(x == b.sample_ms());
  }
  DelaySampler c(DelaySpec::constant(100), 1);
  CHECK(c.sample_ms() == 100.0);
  DelaySampler z(DelaySpec::none(), 1);
  CHECK(z.sample_ms() == 0.0);
}

TEST_CASE("truncated normal sample moments match the truncated distribution") {
  // Mean of N(mu, s) truncated at 0: mu + s * phi(a) / (1 - Phi(a)), a = -mu/s.
  const double mu = 306, s = 174;
  const double a = -mu / s;
  const double phi = std::exp(-a * a / 2) / std::sqrt(2 * M_PI);
  const double tail = 0.5 * std::erfc(a / std::sqrt(2.0));
  const double expected = mu + s * phi / tail;
  DelaySampler d(DelaySpec::truncated_normal(mu, s), 9);
  double sum = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) sum += d.sample_ms();
  CHECK(sum / n == doctest::Approx(expected).epsilon(0.01));
}

TEST_CASE("hop seeds are independent") {
  CHECK(seed_for(42, Hop::ClientToRelay) != seed_for(42, Hop::Upload));
  CHECK(seed_for(42, Hop::Upload) != seed_for(43, Hop::Upload));
}

TEST_CASE("paper preset") {
  auto p = DelayInjection::from_preset("paper", 42);
  CHECK(p.service_for(DeviceKind::Iaq) == DelaySpec::truncated_normal(212, 8));
  CHECK(p.service_for(DeviceKind::Fan).mean_ms == 215);
  CHECK(p.service_for(DeviceKind::Weather).mean_ms == 1118);
  CHECK(p.upload == DelaySpec::truncated_normal(306, 174));
  CHECK(p.client_to_relay == DelaySpec::constant(100));
  CHECK(DelayInjection::from_preset("none").service_for(DeviceKind::Iaq).is_zero());
  CHECK_THROWS_AS(DelayInjection::from_preset("fast"), Error);
  auto j = to_json(p);
  CHECK(to_json(delay_injection_from_json(j)) == j);
}

TEST_CASE("manual clock") {
  ManualClock c(1000);
  c.advance(500);
  CHECK(c.now_ms() == 1500);
  c.set(7);
  CHECK(c.now_ms() == 7);
}

}
