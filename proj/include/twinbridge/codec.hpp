#pragma once

// Canonical JSON wire schema for readings, descriptors and snapshots.
//
//   {"device_id": "...", "timestamp_ms": 1700000000000,
//    "kind": "iaq"|"fan"|"weather", "payload": {...}}
//
// Decoding ignores unknown fields; encoding emits only canonical ones.
// Physical quantities are written with at most three decimals.

#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "twinbridge/model.hpp"

namespace twinbridge {

using nlohmann::json;

/// Rounds to the wire resolution (1e-3). Idempotent on its own output.
double quantize(double value);

/// Parses "YYYY-MM-DDTHH:MM:SS[.fff](Z|+hh:mm|-hh:mm)" into UTC milliseconds.
std::optional<TimestampMs> parse_iso8601(std::string_view text);
std::string format_iso8601(TimestampMs ts);

json reading_to_json(const SensorReading& reading);
/// Throws Error(MissingField|BadType) naming the offending field.
SensorReading reading_from_json(const json& j);

std::string serialize_reading(const SensorReading& reading);
/// Throws Error(MalformedJson) on unparsable text, otherwise as reading_from_json.
SensorReading deserialize_reading(std::string_view text);

json descriptor_to_json(const DeviceDescriptor& device);
DeviceDescriptor descriptor_from_json(const json& j);

json snapshot_to_json(const ZoneSnapshot& snapshot);
ZoneSnapshot snapshot_from_json(const json& j);

/// Parses text into a JSON document, mapping parse failures to MalformedJson.
json parse_json(std::string_view text);

namespace field {
inline constexpr const char* kDeviceId = "device_id";
inline constexpr const char* kTimestampMs = "timestamp_ms";
inline constexpr const char* kKind = "kind";
inline constexpr const char* kPayload = "payload";
inline constexpr const char* kTemperatureC = "temperature_c";
inline constexpr const char* kPm25 = "pm25_ugm3";
inline constexpr const char* kCo2 = "co2_ppm";
inline constexpr const char* kFanRpm = "fan_rpm";
inline constexpr const char* kWindMps = "wind_mps";
inline constexpr const char* kHumidityPct = "humidity_pct";
}  // namespace field

}  // namespace twinbridge
