#include "twinbridge/codec.hpp"

#include <charconv>
#include <chrono>
#include <cmath>

#include <fmt/format.h>

namespace twinbridge {
namespace {

const json& require(const json& j, const char* name) {
  if (!j.is_object()) throw Error(ErrorCode::BadType, name);
  auto it = j.find(name);
  if (it == j.end() || it->is_null()) throw Error(ErrorCode::MissingField, name);
  return *it;
}

std::string require_string(const json& j, const char* name) {
  const json& v = require(j, name);
  if (!v.is_string()) throw Error(ErrorCode::BadType, name);
  return v.get<std::string>();
}

double require_number(const json& j, const char* name) {
  const json& v = require(j, name);
  if (!v.is_number()) throw Error(ErrorCode::BadType, name);
  return v.get<double>();
}

TimestampMs require_timestamp(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::BadType, field::kTimestampMs);
  auto it = j.find(field::kTimestampMs);
  const json* v = nullptr;
  const char* name = field::kTimestampMs;
  if (it != j.end() && !it->is_null()) {
    v = &*it;
  } else if (auto alt = j.find("timestamp"); alt != j.end() && !alt->is_null()) {
    v = &*alt;
    name = "timestamp";
  } else {
    throw Error(ErrorCode::MissingField, field::kTimestampMs);
  }
  if (v->is_number_integer()) return v->get<TimestampMs>();
  if (v->is_string()) {
    if (auto ts = parse_iso8601(v->get<std::string>())) return *ts;
  }
  throw Error(ErrorCode::BadType, name);
}

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

}  // namespace

double quantize(double value) {
  if (!std::isfinite(value)) return value;
  double scaled = std::round(value * 1000.0);
  double q = scaled / 1000.0;
  return q == 0.0 ? 0.0 : q;  // drop negative zero
}

std::optional<TimestampMs> parse_iso8601(std::string_view s) {
  using namespace std::chrono;
  // YYYY-MM-DDTHH:MM:SS is 19 characters.
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') ||
      s[13] != ':' || s[16] != ':')
    return std::nullopt;
  int y, mo, d, h, mi, sec;
  if (!parse_int(s.substr(0, 4), y) || !parse_int(s.substr(5, 2), mo) ||
      !parse_int(s.substr(8, 2), d) || !parse_int(s.substr(11, 2), h) ||
      !parse_int(s.substr(14, 2), mi) || !parse_int(s.substr(17, 2), sec))
    return std::nullopt;
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 60 || h < 0 || mi < 0 || sec < 0) return std::nullopt;

  std::size_t pos = 19;
  TimestampMs millis = 0;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    std::size_t start = pos;
    int digits = 0;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
      if (digits < 3) millis = millis * 10 + (s[pos] - '0');
      ++digits;
      ++pos;
    }
    if (pos == start) return std::nullopt;
    for (; digits < 3; ++digits) millis *= 10;
  }
  TimestampMs offset_min = 0;
  if (pos >= s.size()) return std::nullopt;  // zone designator required
  if (s[pos] == 'Z' || s[pos] == 'z') {
    ++pos;
  } else if (s[pos] == '+' || s[pos] == '-') {
    int sign = s[pos] == '-' ? -1 : 1;
    int oh, om;
    if (s.size() < pos + 6 || s[pos + 3] != ':' || !parse_int(s.substr(pos + 1, 2), oh) ||
        !parse_int(s.substr(pos + 4, 2), om))
      return std::nullopt;
    offset_min = sign * (oh * 60 + om);
    pos += 6;
  } else {
    return std::nullopt;
  }
  if (pos != s.size()) return std::nullopt;

  auto days = sys_days{ymd}.time_since_epoch().count();
  TimestampMs secs = static_cast<TimestampMs>(days) * 86400 + h * 3600 + mi * 60 + sec;
  return (secs - offset_min * 60) * 1000 + millis;
}

std::string format_iso8601(TimestampMs ts) {
  using namespace std::chrono;
  auto tp = sys_time<milliseconds>{milliseconds{ts}};
  auto dp = floor<days>(tp);
  year_month_day ymd{dp};
  hh_mm_ss hms{tp - dp};
  return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}.{:03}Z", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                     hms.hours().count(), hms.minutes().count(), hms.seconds().count(),
                     hms.subseconds().count());
}

json reading_to_json(const SensorReading& r) {
  json payload = json::object();
  std::visit(
      [&payload](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, IaqPayload>) {
          payload[field::kTemperatureC] = quantize(p.temperature_c);
          payload[field::kPm25] = quantize(p.pm25_ugm3);
          payload[field::kCo2] = quantize(p.co2_ppm);
        } else if constexpr (std::is_same_v<T, FanPayload>) {
          payload[field::kFanRpm] = quantize(p.fan_rpm);
        } else {
          payload[field::kWindMps] = quantize(p.wind_mps);
          payload[field::kHumidityPct] = quantize(p.humidity_pct);
        }
      },
      r.payload);
  return json{{field::kDeviceId, r.device_id},
              {field::kTimestampMs, r.timestamp_ms},
              {field::kKind, std::string(to_string(r.kind()))},
              {field::kPayload, std::move(payload)}};
}

SensorReading reading_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::BadType, "reading");
  SensorReading r;
  r.device_id = require_string(j, field::kDeviceId);
  r.timestamp_ms = require_timestamp(j);
  auto kind = parse_device_kind(require_string(j, field::kKind));
  if (!kind) throw Error(ErrorCode::BadType, field::kKind);
  const json& p = require(j, field::kPayload);
  if (!p.is_object()) throw Error(ErrorCode::BadType, field::kPayload);
  switch (*kind) {
    case DeviceKind::Iaq:
      r.payload = IaqPayload{require_number(p, field::kTemperatureC), require_number(p, field::kPm25),
                             require_number(p, field::kCo2)};
      break;
    case DeviceKind::Fan:
      r.payload = FanPayload{require_number(p, field::kFanRpm)};
      break;
    case DeviceKind::Weather:
      r.payload = WeatherPayload{require_number(p, field::kWindMps), require_number(p, field::kHumidityPct)};
      break;
  }
  return r;
}

json parse_json(std::string_view text) {
  json j = json::parse(text.begin(), text.end(), nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw Error(ErrorCode::MalformedJson);
  return j;
}

std::string serialize_reading(const SensorReading& reading) { return reading_to_json(reading).dump(); }

SensorReading deserialize_reading(std::string_view text) { return reading_from_json(parse_json(text)); }

json descriptor_to_json(const DeviceDescriptor& d) {
  return json{{"device_id", d.device_id},
              {"kind", std::string(to_string(d.kind))},
              {"zone_id", d.zone_id},
              {"label", d.label}};
}

DeviceDescriptor descriptor_from_json(const json& j) {
  DeviceDescriptor d;
  d.device_id = require_string(j, "device_id");
  auto kind = parse_device_kind(require_string(j, "kind"));
  if (!kind) throw Error(ErrorCode::BadType, "kind");
  d.kind = *kind;
  d.zone_id = require_string(j, "zone_id");
  if (auto it = j.find("label"); it != j.end() && it->is_string()) d.label = it->get<std::string>();
  return d;
}

json snapshot_to_json(const ZoneSnapshot& s) {
  json readings = json::object();
  for (const auto& [id, r] : s.readings) readings[id] = reading_to_json(r);
  json stale = json::object();
  for (const auto& [id, flag] : s.stale) stale[id] = flag;
  return json{{"zone_id", s.zone_id}, {"as_of_ms", s.as_of_ms}, {"readings", std::move(readings)},
              {"stale", std::move(stale)}};
}

ZoneSnapshot snapshot_from_json(const json& j) {
  ZoneSnapshot s;
  s.zone_id = require_string(j, "zone_id");
  const json& as_of = require(j, "as_of_ms");
  if (!as_of.is_number_integer()) throw Error(ErrorCode::BadType, "as_of_ms");
  s.as_of_ms = as_of.get<TimestampMs>();
  const json& readings = require(j, "readings");
  if (!readings.is_object()) throw Error(ErrorCode::BadType, "readings");
  for (const auto& [id, r] : readings.items()) s.readings[id] = reading_from_json(r);
  if (auto it = j.find("stale"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw Error(ErrorCode::BadType, "stale");
    for (const auto& [id, flag] : it->items()) {
      if (!flag.is_boolean()) throw Error(ErrorCode::BadType, "stale");
      s.stale[id] = flag.get<bool>();
    }
  }
  for (const auto& [id, r] : s.readings) s.stale.try_emplace(id, false);
  return s;
}

}  // namespace twinbridge
