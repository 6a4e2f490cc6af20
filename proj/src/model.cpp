#include "twinbridge/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

namespace twinbridge {

std::string_view to_string(DeviceKind kind) {
  switch (kind) {
    case DeviceKind::Iaq:
      return "iaq";
    case DeviceKind::Fan:
      return "fan";
    case DeviceKind::Weather:
      return "weather";
  }
  return "iaq";
}

std::optional<DeviceKind> parse_device_kind(std::string_view text) {
  for (DeviceKind k : kAllDeviceKinds) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

std::string_view display_name(DeviceKind kind) {
  switch (kind) {
    case DeviceKind::Iaq:
      return "IAQ Sensor";
    case DeviceKind::Fan:
      return "Fan Sensor";
    case DeviceKind::Weather:
      return "Weather Sensor";
  }
  return "IAQ Sensor";
}

DeviceKind kind_of(const Payload& payload) {
  switch (payload.index()) {
    case 0:
      return DeviceKind::Iaq;
    case 1:
      return DeviceKind::Fan;
    default:
      return DeviceKind::Weather;
  }
}

ZoneSnapshot make_snapshot(std::string zone_id, TimestampMs as_of,
                           const std::vector<SensorReading>& readings,
                           TimestampMs staleness_threshold_ms) {
  ZoneSnapshot snap;
  snap.zone_id = std::move(zone_id);
  for (const auto& r : readings) as_of = std::max(as_of, r.timestamp_ms);
  snap.as_of_ms = as_of;
  for (const auto& r : readings) {
    snap.stale[r.device_id] = is_stale(as_of, r.timestamp_ms, staleness_threshold_ms);
    snap.readings[r.device_id] = r;
  }
  return snap;
}

void Registry::add(DeviceDescriptor device) {
  if (device.device_id.empty()) throw Error(ErrorCode::ConfigInvalid, "empty device_id");
  if (device.zone_id.empty())
    throw Error(ErrorCode::ConfigInvalid, "empty zone_id for " + device.device_id);
  if (index_.count(device.device_id))
    throw Error(ErrorCode::ConfigInvalid, "duplicate device_id " + device.device_id);
  index_.emplace(device.device_id, devices_.size());
  devices_.push_back(std::move(device));
}

const DeviceDescriptor* Registry::find(std::string_view device_id) const {
  auto it = index_.find(device_id);
  return it == index_.end() ? nullptr : &devices_[it->second];
}

std::vector<DeviceDescriptor> Registry::zone_devices(std::string_view zone_id) const {
  std::vector<DeviceDescriptor> out;
  for (const auto& d : devices_)
    if (d.zone_id == zone_id) out.push_back(d);
  return out;
}

std::vector<DeviceDescriptor> Registry::devices_of(DeviceKind kind) const {
  std::vector<DeviceDescriptor> out;
  for (const auto& d : devices_)
    if (d.kind == kind) out.push_back(d);
  return out;
}

std::vector<std::string> Registry::zones() const {
  std::set<std::string> zones;
  for (const auto& d : devices_) zones.insert(d.zone_id);
  return {zones.begin(), zones.end()};
}

std::size_t Registry::count(DeviceKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(devices_.begin(), devices_.end(), [kind](const auto& d) { return d.kind == kind; }));
}

Registry Registry::default_topology() {
  Registry reg;
  for (int i = 1; i <= 11; ++i) {
    reg.add({fmt::format("iaq-{:02}", i), DeviceKind::Iaq, "kpark", fmt::format("IAQ Sensor {:02}", i)});
  }
  for (int i = 1; i <= 4; ++i) {
    reg.add({fmt::format("fan-{:02}", i), DeviceKind::Fan, "kpark", fmt::format("Ceiling Fan {:02}", i)});
  }
  reg.add({"weather-01", DeviceKind::Weather, "rooftop", "Rooftop Weather Station"});
  return reg;
}

namespace {

// NaN fails every comparison, so `!(lo <= v)` rejects it as well.
std::optional<Rejection> check_min(double v, double lo, const char* field) {
  if (!(v >= lo)) return Rejection{ErrorCode::OutOfRange, field};
  return std::nullopt;
}

std::optional<Rejection> check_range(double v, double lo, double hi, const char* field) {
  if (!(v >= lo && v <= hi)) return Rejection{ErrorCode::OutOfRange, field};
  return std::nullopt;
}

struct PayloadChecker {
  std::optional<Rejection> operator()(const IaqPayload& p) const {
    if (auto r = check_range(p.temperature_c, -40.0, 80.0, "temperature_c")) return r;
    if (auto r = check_min(p.pm25_ugm3, 0.0, "pm25_ugm3")) return r;
    return check_min(p.co2_ppm, 0.0, "co2_ppm");
  }
  std::optional<Rejection> operator()(const FanPayload& p) const {
    return check_min(p.fan_rpm, 0.0, "fan_rpm");
  }
  std::optional<Rejection> operator()(const WeatherPayload& p) const {
    if (auto r = check_min(p.wind_mps, 0.0, "wind_mps")) return r;
    return check_range(p.humidity_pct, 0.0, 100.0, "humidity_pct");
  }
};

}  // namespace

std::optional<Rejection> validate_reading(const SensorReading& reading, const Registry& registry) {
  const DeviceDescriptor* device = registry.find(reading.device_id);
  if (device == nullptr) return Rejection{ErrorCode::UnknownDevice, reading.device_id};
  if (device->kind != reading.kind()) return Rejection{ErrorCode::KindMismatch, "kind"};
  return std::visit(PayloadChecker{}, reading.payload);
}

}  // namespace twinbridge
