#pragma once

// Domain types shared by every service: device inventory, readings and
// zone snapshots, plus reading validation.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "twinbridge/error.hpp"

namespace twinbridge {

/// UTC milliseconds since the Unix epoch.
using TimestampMs = std::int64_t;

inline constexpr TimestampMs kDefaultStalenessThresholdMs = 60'000;

enum class DeviceKind { Iaq, Fan, Weather };

inline constexpr DeviceKind kAllDeviceKinds[] = {DeviceKind::Iaq, DeviceKind::Fan,
                                                 DeviceKind::Weather};

/// Wire token: "iaq", "fan", "weather".
std::string_view to_string(DeviceKind kind);
std::optional<DeviceKind> parse_device_kind(std::string_view text);
/// Human-facing row label ("IAQ Sensor", "Fan Sensor", "Weather Sensor").
std::string_view display_name(DeviceKind kind);

struct DeviceDescriptor {
  std::string device_id;
  DeviceKind kind = DeviceKind::Iaq;
  std::string zone_id;
  std::string label;

  bool operator==(const DeviceDescriptor&) const = default;
};

struct IaqPayload {
  double temperature_c = 0.0;
  double pm25_ugm3 = 0.0;
  double co2_ppm = 0.0;

  bool operator==(const IaqPayload&) const = default;
};

struct FanPayload {
  double fan_rpm = 0.0;

  bool operator==(const FanPayload&) const = default;
};

struct WeatherPayload {
  double wind_mps = 0.0;
  double humidity_pct = 0.0;

  bool operator==(const WeatherPayload&) const = default;
};

using Payload = std::variant<IaqPayload, FanPayload, WeatherPayload>;

DeviceKind kind_of(const Payload& payload);

struct SensorReading {
  std::string device_id;
  TimestampMs timestamp_ms = 0;
  Payload payload;

  DeviceKind kind() const { return kind_of(payload); }
  bool operator==(const SensorReading&) const = default;
};

/// Latest reading per device of one zone, with per-device staleness flags
/// computed against `as_of_ms`.
struct ZoneSnapshot {
  std::string zone_id;
  TimestampMs as_of_ms = 0;
  std::map<std::string, SensorReading> readings;
  std::map<std::string, bool> stale;

  bool operator==(const ZoneSnapshot&) const = default;
};

/// True iff the reading is older than the threshold at `as_of`.
constexpr bool is_stale(TimestampMs as_of, TimestampMs reading_ts, TimestampMs threshold) {
  return (as_of - reading_ts) > threshold;
}

/// Builds a snapshot; `as_of` is raised to the newest reading timestamp so the
/// snapshot never predates its contents.
ZoneSnapshot make_snapshot(std::string zone_id, TimestampMs as_of,
                           const std::vector<SensorReading>& readings,
                           TimestampMs staleness_threshold_ms);

class Registry {
 public:
  Registry() = default;

  /// Throws Error(ConfigInvalid) on duplicate or empty ids.
  void add(DeviceDescriptor device);

  const DeviceDescriptor* find(std::string_view device_id) const;
  const std::vector<DeviceDescriptor>& devices() const { return devices_; }
  std::vector<DeviceDescriptor> zone_devices(std::string_view zone_id) const;
  std::vector<DeviceDescriptor> devices_of(DeviceKind kind) const;
  std::vector<std::string> zones() const;
  std::size_t count(DeviceKind kind) const;
  bool empty() const { return devices_.empty(); }
  std::size_t size() const { return devices_.size(); }

  /// 11 IAQ and 4 fan sensors in "kpark", one weather station on "rooftop".
  static Registry default_topology();

 private:
  std::vector<DeviceDescriptor> devices_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

struct Rejection {
  ErrorCode code;
  /// Offending field for OUT_OF_RANGE, device id for UNKNOWN_DEVICE.
  std::string field;

  bool operator==(const Rejection&) const = default;
};

/// Checks plausibility bounds and registry membership; nullopt means valid.
std::optional<Rejection> validate_reading(const SensorReading& reading, const Registry& registry);

}  // namespace twinbridge
