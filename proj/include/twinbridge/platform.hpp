#pragma once

// Sensor platform emulator: device registry, ingestion with validation,
// latest-value and zone-snapshot queries.

#include <atomic>
#include <deque>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinbridge/clock.hpp"
#include "twinbridge/delay.hpp"
#include "twinbridge/model.hpp"

namespace twinbridge {

class HttpService;

struct PlatformConfig {
  std::string host = "127.0.0.1";
  int port = 8081;
  Registry registry = Registry::default_topology();
  TimestampMs staleness_threshold_ms = kDefaultStalenessThresholdMs;
  std::size_t history_capacity = 1000;
  DelayInjection injection;
  /// When set, accepted readings are appended here as JSON lines and
  /// replayed on startup.
  std::optional<std::string> persist_path;
};

nlohmann::json platform_config_to_json(const PlatformConfig& cfg);
PlatformConfig platform_config_from_json(const nlohmann::json& j);

/// Per-device latest slot plus a bounded history ring. Each slot has its own
/// lock; readers never see a half-written reading.
class LatestStore {
 public:
  LatestStore(const Registry& registry, std::size_t history_capacity);

  /// Appends to history; replaces the latest slot only if the reading is not
  /// older than the current one. Returns true when the latest slot changed.
  bool put(const SensorReading& reading);

  std::optional<SensorReading> latest(const std::string& device_id) const;
  std::vector<SensorReading> history(const std::string& device_id) const;
  bool contains(const std::string& device_id) const { return slots_.count(device_id) != 0; }

 private:
  struct Slot {
    mutable std::mutex mu;
    std::optional<SensorReading> latest;
    std::deque<SensorReading> history;
  };

  std::size_t capacity_;
  std::map<std::string, std::unique_ptr<Slot>, std::less<>> slots_;
};

struct IngestResult {
  bool accepted = false;
  TimestampMs received_ms = 0;
  std::optional<Rejection> rejection;
};

class Platform {
 public:
  explicit Platform(PlatformConfig cfg, std::shared_ptr<Clock> clock = system_clock());

  IngestResult ingest(const SensorReading& reading);
  /// Throws Error(UnknownDevice | NoData).
  SensorReading query_latest(const std::string& device_id) const;
  /// Throws Error(UnknownZone).
  ZoneSnapshot query_zone(const std::string& zone_id) const;

  const Registry& registry() const { return cfg_.registry; }
  const PlatformConfig& config() const { return cfg_; }
  const LatestStore& store() const { return store_; }
  const Clock& clock() const { return *clock_; }

 private:
  void load_persisted();

  PlatformConfig cfg_;
  std::shared_ptr<Clock> clock_;
  LatestStore store_;
  std::mutex persist_mu_;
  std::ofstream persist_;
};

struct PlatformCounters {
  std::uint64_t ingest = 0;
  std::uint64_t latest = 0;
  std::uint64_t snapshot = 0;
  std::uint64_t devices = 0;
};

/// HTTP front end:
///   POST /api/v1/ingest
///   GET  /api/v1/devices
///   GET  /api/v1/devices/{id}/latest
///   GET  /api/v1/zones/{zone}/snapshot
///   GET  /api/v1/health
/// Query responses carry the server instant in the `X-Served-Ms` header.
class PlatformServer {
 public:
  explicit PlatformServer(std::shared_ptr<Platform> platform);
  ~PlatformServer();

  void start(const std::string& host, int port);
  void stop();
  int port() const;
  std::string base_url() const;
  PlatformCounters counters() const;
  Platform& platform() { return *platform_; }

 private:
  void install_routes();
  void service_delay(DeviceKind kind);

  std::shared_ptr<Platform> platform_;
  std::unique_ptr<HttpService> http_;
  std::map<DeviceKind, std::unique_ptr<DelaySampler>> service_samplers_;
  std::atomic<std::uint64_t> ingest_count_{0};
  std::atomic<std::uint64_t> latest_count_{0};
  std::atomic<std::uint64_t> snapshot_count_{0};
  std::atomic<std::uint64_t> devices_count_{0};
};

}  // namespace twinbridge
