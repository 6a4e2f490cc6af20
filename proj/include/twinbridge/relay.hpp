#pragma once

// Relay between the sensor platform and the twin-state server: serves
// device/zone reads with caching and request coalescing, and periodically
// pushes zone updates (snapshot + visualization) to the twin.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinbridge/cache.hpp"
#include "twinbridge/clock.hpp"
#include "twinbridge/delay.hpp"
#include "twinbridge/model.hpp"
#include "twinbridge/viz.hpp"

namespace twinbridge {

class HttpService;

struct RelayConfig {
  std::string host = "127.0.0.1";
  int port = 8082;
  std::string platform_base_url = "http://127.0.0.1:8081";
  std::string twin_base_url = "http://127.0.0.1:8083";
  std::chrono::milliseconds poll_interval{5000};
  /// 0 disables caching.
  std::chrono::milliseconds cache_ttl{2000};
  std::chrono::milliseconds request_timeout{10000};
  int retry_count = 2;
  std::chrono::milliseconds retry_spacing{100};
  bool coalesce = true;
  bool push_enabled = true;
  std::vector<std::string> zones{"kpark", "rooftop"};

  /// Throws Error(ConfigInvalid).
  void validate() const;
};

nlohmann::json relay_config_to_json(const RelayConfig& cfg);
RelayConfig relay_config_from_json(const nlohmann::json& j);

enum class ServedFrom { Cache, Origin };
std::string_view to_string(ServedFrom from);

struct Provenance {
  ServedFrom served_from = ServedFrom::Origin;
  /// Round trip of the origin call that produced the value; 0 for cache hits.
  double origin_latency_ms = 0.0;
};

nlohmann::json provenance_to_json(const Provenance& p);

template <class T>
struct Fetched {
  T value;
  Provenance provenance;
};

struct RelayHealth {
  std::uint64_t cycles = 0;
  std::uint64_t cycle_errors = 0;
  std::uint64_t push_failures = 0;
  std::uint64_t origin_failures = 0;
  std::uint64_t updates_pushed = 0;
  std::uint64_t origin_calls = 0;
};

nlohmann::json relay_health_to_json(const RelayHealth& h);

class Relay {
 public:
  Relay(RelayConfig cfg, VizConfig viz_cfg, DelayInjection injection = {},
        std::shared_ptr<Clock> clock = system_clock());
  ~Relay();

  /// Errors: ORIGIN_TIMEOUT (after retry_count + 1 attempts),
  /// ORIGIN_ERROR(status), UNKNOWN_DEVICE and NO_DATA propagated.
  Fetched<SensorReading> fetch_device(const std::string& device_id);
  /// As fetch_device; UNKNOWN_ZONE propagated.
  Fetched<ZoneSnapshot> fetch_zone(const std::string& zone_id);

  /// One poll-and-push pass over every configured zone. Never throws.
  void run_push_cycle();
  void start_push_loop();
  void stop_push_loop();

  RelayHealth health() const;
  const RelayConfig& config() const { return cfg_; }
  const VizConfig& viz_config() const { return viz_cfg_; }

 private:
  /// GET against the platform with retries; returns the parsed body and
  /// the latency of the successful attempt.
  std::pair<nlohmann::json, double> origin_get(const std::string& path);
  Fetched<SensorReading> fetch_device_origin(const std::string& device_id);
  Fetched<ZoneSnapshot> fetch_zone_origin(const std::string& zone_id);
  void push_loop();

  RelayConfig cfg_;
  VizConfig viz_cfg_;
  std::shared_ptr<Clock> clock_;
  DelaySampler relay_to_platform_;
  TtlCache<SensorReading> device_cache_;
  TtlCache<ZoneSnapshot> zone_cache_;
  SingleFlight<Fetched<SensorReading>> device_flight_;
  SingleFlight<Fetched<ZoneSnapshot>> zone_flight_;

  std::atomic<std::uint64_t> cycles_{0};
  std::atomic<std::uint64_t> cycle_errors_{0};
  std::atomic<std::uint64_t> push_failures_{0};
  std::atomic<std::uint64_t> origin_failures_{0};
  std::atomic<std::uint64_t> updates_pushed_{0};
  std::atomic<std::uint64_t> origin_calls_{0};

  std::thread push_thread_;
  std::mutex loop_mu_;
  std::condition_variable loop_cv_;
  bool loop_stop_ = false;
};

/// HTTP front end:
///   GET /relay/v1/devices/{id}   canonical reading + "provenance"
///   GET /relay/v1/zones/{zone}   snapshot + "provenance"
///   GET /relay/v1/health
/// Client-facing requests pay the injected client->relay hop.
class RelayServer {
 public:
  RelayServer(std::shared_ptr<Relay> relay, const DelayInjection& injection = {});
  ~RelayServer();

  void start(const std::string& host, int port);
  void stop();
  int port() const;
  std::string base_url() const;
  Relay& relay() { return *relay_; }

 private:
  void install_routes();

  std::shared_ptr<Relay> relay_;
  std::unique_ptr<HttpService> http_;
  DelaySampler client_hop_;
};

}  // namespace twinbridge
