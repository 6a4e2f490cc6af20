#include "twinbridge/relay.hpp"

#include <spdlog/spdlog.h>

#include "twinbridge/codec.hpp"
#include "twinbridge/http_service.hpp"
#include "twinbridge/twin.hpp"

namespace twinbridge {

using std::chrono::milliseconds;

void RelayConfig::validate() const {
  if (platform_base_url.empty()) throw Error(ErrorCode::ConfigInvalid, "platform_base_url is empty");
  if (twin_base_url.empty()) throw Error(ErrorCode::ConfigInvalid, "twin_base_url is empty");
  if (poll_interval.count() <= 0) throw Error(ErrorCode::ConfigInvalid, "poll_interval must be > 0");
  if (request_timeout.count() <= 0) throw Error(ErrorCode::ConfigInvalid, "request_timeout must be > 0");
  if (cache_ttl.count() < 0) throw Error(ErrorCode::ConfigInvalid, "cache_ttl must be >= 0");
  if (cache_ttl > poll_interval) throw Error(ErrorCode::ConfigInvalid, "cache_ttl must be <= poll_interval");
  if (retry_count < 0) throw Error(ErrorCode::ConfigInvalid, "retry_count must be >= 0");
  if (retry_spacing.count() < 0) throw Error(ErrorCode::ConfigInvalid, "retry_spacing must be >= 0");
}

nlohmann::json relay_config_to_json(const RelayConfig& c) {
  return {{"host", c.host},
          {"port", c.port},
          {"platform_base_url", c.platform_base_url},
          {"twin_base_url", c.twin_base_url},
          {"poll_interval_ms", c.poll_interval.count()},
          {"cache_ttl_ms", c.cache_ttl.count()},
          {"request_timeout_ms", c.request_timeout.count()},
          {"retry_count", c.retry_count},
          {"retry_spacing_ms", c.retry_spacing.count()},
          {"coalesce", c.coalesce},
          {"push_enabled", c.push_enabled},
          {"zones", c.zones}};
}

RelayConfig relay_config_from_json(const nlohmann::json& j) {
  RelayConfig c;
  if (j.is_null()) return c;
  if (!j.is_object()) throw Error(ErrorCode::ConfigInvalid, "relay config must be an object");
  try {
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    c.platform_base_url = j.value("platform_base_url", c.platform_base_url);
    c.twin_base_url = j.value("twin_base_url", c.twin_base_url);
    c.poll_interval = milliseconds(j.value("poll_interval_ms", c.poll_interval.count()));
    c.cache_ttl = milliseconds(j.value("cache_ttl_ms", c.cache_ttl.count()));
    c.request_timeout = milliseconds(j.value("request_timeout_ms", c.request_timeout.count()));
    c.retry_count = j.value("retry_count", c.retry_count);
    c.retry_spacing = milliseconds(j.value("retry_spacing_ms", c.retry_spacing.count()));
    c.coalesce = j.value("coalesce", c.coalesce);
    c.push_enabled = j.value("push_enabled", c.push_enabled);
    c.zones = j.value("zones", c.zones);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, e.what());
  }
  c.validate();
  return c;
}

std::string_view to_string(ServedFrom from) { return from == ServedFrom::Cache ? "cache" : "origin"; }

nlohmann::json provenance_to_json(const Provenance& p) {
  return {{"served_from", std::string(to_string(p.served_from))}, {"origin_latency_ms", p.origin_latency_ms}};
}

nlohmann::json relay_health_to_json(const RelayHealth& h) {
  return {{"status", "ok"},
          {"cycles", h.cycles},
          {"cycle_errors", h.cycle_errors},
          {"push_failures", h.push_failures},
          {"origin_failures", h.origin_failures},
          {"updates_pushed", h.updates_pushed},
          {"origin_calls", h.origin_calls}};
}

Relay::Relay(RelayConfig cfg, VizConfig viz_cfg, DelayInjection injection, std::shared_ptr<Clock> clock)
    : cfg_(std::move(cfg)),
      viz_cfg_(viz_cfg),
      clock_(std::move(clock)),
      relay_to_platform_(injection.relay_to_platform, seed_for(injection.seed, Hop::RelayToPlatform)),
      device_cache_(cfg_.cache_ttl.count(), clock_),
      zone_cache_(cfg_.cache_ttl.count(), clock_) {
  cfg_.validate();
  viz_cfg_.validate();
}

Relay::~Relay() { stop_push_loop(); }

std::pair<nlohmann::json, double> Relay::origin_get(const std::string& path) {
  const int attempts = cfg_.retry_count + 1;
  ErrorCode last = ErrorCode::OriginTimeout;
  std::string last_detail = cfg_.platform_base_url + path;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(cfg_.retry_spacing);
    ++origin_calls_;
    relay_to_platform_.apply();
    auto t0 = std::chrono::steady_clock::now();
    auto res = http_get_json(cfg_.platform_base_url, path, cfg_.request_timeout);
    double latency = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (!res) {
      last = ErrorCode::OriginTimeout;
      continue;
    }
    if (res->status == 200) return {std::move(res->body), latency};
    if (res->status >= 400 && res->status < 500) {
      // The origin answered definitively; retrying will not change it.
      if (auto reason = reason_of(res->body)) throw Error(*reason, res->body.value("detail", ""));
      ++origin_failures_;
      throw Error(ErrorCode::OriginError, std::to_string(res->status));
    }
    last = ErrorCode::OriginError;
    last_detail = std::to_string(res->status);
  }
  ++origin_failures_;
  throw Error(last, last_detail);
}

Fetched<SensorReading> Relay::fetch_device_origin(const std::string& device_id) {
  auto [body, latency] = origin_get("/api/v1/devices/" + device_id + "/latest");
  SensorReading reading;
  try {
    reading = reading_from_json(body);
  } catch (const Error& e) {
    ++origin_failures_;
    throw Error(ErrorCode::OriginError, std::string("bad reading from origin: ") + e.what());
  }
  device_cache_.put(device_id, reading, clock_->now_ms());
  return {std::move(reading), {ServedFrom::Origin, latency}};
}

Fetched<ZoneSnapshot> Relay::fetch_zone_origin(const std::string& zone_id) {
  auto [body, latency] = origin_get("/api/v1/zones/" + zone_id + "/snapshot");
  ZoneSnapshot snap;
  try {
    snap = snapshot_from_json(body);
  } catch (const Error& e) {
    ++origin_failures_;
    throw Error(ErrorCode::OriginError, std::string("bad snapshot from origin: ") + e.what());
  }
  zone_cache_.put(zone_id, snap, clock_->now_ms());
  return {std::move(snap), {ServedFrom::Origin, latency}};
}

Fetched<SensorReading> Relay::fetch_device(const std::string& device_id) {
  if (auto hit = device_cache_.get(device_id)) return {std::move(hit->value), {ServedFrom::Cache, 0.0}};
  if (!cfg_.coalesce) return fetch_device_origin(device_id);
  return device_flight_.run(device_id, [&] { return fetch_device_origin(device_id); }).first;
}

Fetched<ZoneSnapshot> Relay::fetch_zone(const std::string& zone_id) {
  if (auto hit = zone_cache_.get(zone_id)) return {std::move(hit->value), {ServedFrom::Cache, 0.0}};
  if (!cfg_.coalesce) return fetch_zone_origin(zone_id);
  return zone_flight_.run(zone_id, [&] { return fetch_zone_origin(zone_id); }).first;
}

void Relay::run_push_cycle() {
  bool failed = false;
  for (const auto& zone : cfg_.zones) {
    TwinUpdate update;
    try {
      auto fetched = fetch_zone(zone);
      update.zone_id = zone;
      update.viz = compose(fetched.value, viz_cfg_);
      update.snapshot = std::move(fetched.value);
    } catch (const std::exception& e) {
      failed = true;
      spdlog::warn("relay: fetching zone {} failed: {}", zone, e.what());
      continue;
    }
    update.relay_sent_ms = clock_->now_ms();
    auto res = http_post_json(cfg_.twin_base_url, "/twin/v1/zones/" + zone + "/update", twin_update_to_json(update),
                              cfg_.request_timeout);
    if (!res || res->status != 200) {
      failed = true;
      ++push_failures_;
      spdlog::warn("relay: push for zone {} failed ({})", zone, res ? res->body.dump() : std::string("unreachable"));
      continue;
    }
    ++updates_pushed_;
  }
  ++cycles_;
  if (failed) ++cycle_errors_;
}

void Relay::start_push_loop() {
  if (push_thread_.joinable()) return;
  {
    std::lock_guard lock(loop_mu_);
    loop_stop_ = false;
  }
  push_thread_ = std::thread([this] { push_loop(); });
}

void Relay::stop_push_loop() {
  {
    std::lock_guard lock(loop_mu_);
    loop_stop_ = true;
  }
  loop_cv_.notify_all();
  if (push_thread_.joinable()) push_thread_.join();
}

void Relay::push_loop() {
  auto next = std::chrono::steady_clock::now();
  while (true) {
    run_push_cycle();
    next += cfg_.poll_interval;
    // A slow cycle skips missed slots instead of bursting to catch up.
    auto now = std::chrono::steady_clock::now();
    while (next <= now) next += cfg_.poll_interval;
    std::unique_lock lock(loop_mu_);
    if (loop_cv_.wait_until(lock, next, [this] { return loop_stop_; })) return;
  }
}

RelayHealth Relay::health() const {
  return {cycles_.load(),          cycle_errors_.load(),   push_failures_.load(),
          origin_failures_.load(), updates_pushed_.load(), origin_calls_.load()};
}

RelayServer::RelayServer(std::shared_ptr<Relay> relay, const DelayInjection& injection)
    : relay_(std::move(relay)),
      http_(std::make_unique<HttpService>("relay")),
      client_hop_(injection.client_to_relay, seed_for(injection.seed, Hop::ClientToRelay)) {
  install_routes();
}

RelayServer::~RelayServer() { stop(); }

void RelayServer::start(const std::string& host, int port) { http_->start(host, port); }
void RelayServer::stop() { http_->stop(); }
int RelayServer::port() const { return http_->port(); }
std::string RelayServer::base_url() const { return http_->base_url(); }

void RelayServer::install_routes() {
  auto& svr = http_->server();

  svr.Get(R"(/relay/v1/devices/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    client_hop_.apply();
    try {
      auto fetched = relay_->fetch_device(req.matches[1]);
      auto body = reading_to_json(fetched.value);
      body["provenance"] = provenance_to_json(fetched.provenance);
      send_json(res, body);
    } catch (const Error& e) {
      send_error(res, e);
    }
  });

  svr.Get(R"(/relay/v1/zones/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    client_hop_.apply();
    try {
      auto fetched = relay_->fetch_zone(req.matches[1]);
      auto body = snapshot_to_json(fetched.value);
      body["provenance"] = provenance_to_json(fetched.provenance);
      send_json(res, body);
    } catch (const Error& e) {
      send_error(res, e);
    }
  });

  svr.Get("/relay/v1/health", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, relay_health_to_json(relay_->health()));
  });
}

}  // namespace twinbridge
