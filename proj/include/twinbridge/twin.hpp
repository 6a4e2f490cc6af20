#pragma once

// Virtual-space state server: per-zone last-writer-wins state, change
// fan-out to subscribers, and the HTTP/NDJSON front end.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinbridge/clock.hpp"
#include "twinbridge/model.hpp"
#include "twinbridge/viz.hpp"

namespace twinbridge {

class HttpService;

inline constexpr std::size_t kDefaultSubscriberBuffer = 64;

struct TwinUpdate {
  std::string zone_id;
  ZoneSnapshot snapshot;
  VizParameters viz;
  TimestampMs relay_sent_ms = 0;

  bool operator==(const TwinUpdate&) const = default;
};

nlohmann::json twin_update_to_json(const TwinUpdate& update);
TwinUpdate twin_update_from_json(const nlohmann::json& j);

struct TwinEnvironmentState {
  std::string zone_id;
  /// Number of updates applied to the zone so far; 0 before the first.
  std::uint64_t sequence_no = 0;
  TimestampMs applied_ms = 0;
  std::optional<TwinUpdate> update;

  bool operator==(const TwinEnvironmentState&) const = default;
};

nlohmann::json twin_state_to_json(const TwinEnvironmentState& state);
TwinEnvironmentState twin_state_from_json(const nlohmann::json& j);

struct TwinEvent {
  std::uint64_t sequence_no = 0;
  TimestampMs applied_ms = 0;
  TwinUpdate update;
};

nlohmann::json twin_event_to_json(const TwinEvent& event);
TwinEvent twin_event_from_json(const nlohmann::json& j);

/// Bounded per-subscriber queue. Publishing never blocks: overflowing the
/// buffer marks the subscription lagged and drops further events.
class Subscription {
 public:
  Subscription(std::string zone_id, std::size_t capacity);

  /// Next event in sequence order, or nullopt on timeout. Once lagged, the
  /// events buffered before the overflow are still delivered, then this
  /// throws Error(SubscriberLagged).
  std::optional<TwinEvent> next(std::chrono::milliseconds timeout);

  bool lagged() const;
  void close();
  bool closed() const;
  const std::string& zone_id() const { return zone_id_; }

  /// Called by the store with the zone lock held.
  void publish(const TwinEvent& event);

 private:
  std::string zone_id_;
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<TwinEvent> queue_;
  bool lagged_ = false;
  bool closed_ = false;
};

struct ApplyResult {
  bool applied = false;
  std::uint64_t sequence_no = 0;
  std::optional<ErrorCode> reason;
};

class TwinStore {
 public:
  TwinStore(VizConfig viz_cfg, std::vector<std::string> zones, std::shared_ptr<Clock> clock = system_clock(),
            std::size_t subscriber_buffer = kDefaultSubscriberBuffer);

  /// Applies iff relay_sent_ms >= the held update's; unknown zones are
  /// created on first update. Rejections: STALE_UPDATE, VIZ_MISMATCH.
  ApplyResult apply_update(const TwinUpdate& update);

  /// Throws Error(UnknownZone).
  TwinEnvironmentState get_state(const std::string& zone_id) const;
  /// Throws Error(UnknownZone). `start_sequence` receives the sequence_no
  /// held at registration; the subscription delivers everything after it.
  std::shared_ptr<Subscription> subscribe(const std::string& zone_id, std::uint64_t* start_sequence = nullptr);

  std::vector<std::string> zones() const;
  const VizConfig& viz_config() const { return viz_cfg_; }

 private:
  struct Zone {
    mutable std::mutex mu;
    TwinEnvironmentState state;
    std::vector<std::weak_ptr<Subscription>> subscribers;
  };

  Zone* find_zone(const std::string& zone_id) const;
  Zone& zone_for_write(const std::string& zone_id);

  VizConfig viz_cfg_;
  std::shared_ptr<Clock> clock_;
  std::size_t subscriber_buffer_;
  mutable std::mutex zones_mu_;
  std::map<std::string, std::unique_ptr<Zone>, std::less<>> zones_;
};

struct TwinConfig {
  std::string host = "127.0.0.1";
  int port = 8083;
  std::vector<std::string> zones{"kpark", "rooftop"};
  std::size_t subscriber_buffer = kDefaultSubscriberBuffer;
  VizConfig viz;
};

nlohmann::json twin_config_to_json(const TwinConfig& cfg);
TwinConfig twin_config_from_json(const nlohmann::json& j);

/// HTTP front end:
///   POST /twin/v1/zones/{zone}/update
///   GET  /twin/v1/zones/{zone}/state
///   GET  /twin/v1/zones/{zone}/events   (newline-delimited JSON)
///   GET  /twin/v1/health
class TwinServer {
 public:
  explicit TwinServer(std::shared_ptr<TwinStore> store,
                      std::chrono::milliseconds heartbeat = std::chrono::milliseconds(1000));
  ~TwinServer();

  void start(const std::string& host, int port);
  void stop();
  int port() const;
  std::string base_url() const;
  TwinStore& store() { return *store_; }

 private:
  void install_routes();

  std::shared_ptr<TwinStore> store_;
  std::unique_ptr<HttpService> http_;
  std::chrono::milliseconds heartbeat_;
  std::atomic<std::uint64_t> updates_received_{0};
};

/// Client for the NDJSON event stream. Runs a background reader that hands
/// every parsed line to the callback; heartbeat lines are skipped.
class EventStreamClient {
 public:
  using Callback = std::function<void(const nlohmann::json& line)>;

  EventStreamClient(std::string base_url, std::string zone_id, Callback on_line);
  ~EventStreamClient();

  void start();
  void stop();
  /// True once the server ended the stream (lag notice or shutdown).
  bool finished() const { return finished_.load(); }

 private:
  std::string base_url_;
  std::string zone_id_;
  Callback on_line_;
  std::thread thread_;
  std::atomic<bool> stop_{false};
  std::atomic<bool> finished_{false};
};

}  // namespace twinbridge
