#include "twinbridge/platform.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "twinbridge/codec.hpp"
#include "twinbridge/http_service.hpp"

namespace twinbridge {

nlohmann::json platform_config_to_json(const PlatformConfig& cfg) {
  nlohmann::json devices = nlohmann::json::array();
  for (const auto& d : cfg.registry.devices()) devices.push_back(descriptor_to_json(d));
  nlohmann::json j{{"host", cfg.host},
                   {"port", cfg.port},
                   {"devices", std::move(devices)},
                   {"staleness_threshold_ms", cfg.staleness_threshold_ms},
                   {"history_capacity", cfg.history_capacity},
                   {"injection", to_json(cfg.injection)}};
  if (cfg.persist_path) j["persist_path"] = *cfg.persist_path;
  return j;
}

PlatformConfig platform_config_from_json(const nlohmann::json& j) {
  PlatformConfig cfg;
  if (j.is_null()) return cfg;
  if (!j.is_object()) throw Error(ErrorCode::ConfigInvalid, "platform config must be an object");
  try {
    cfg.host = j.value("host", cfg.host);
    cfg.port = j.value("port", cfg.port);
    cfg.staleness_threshold_ms = j.value("staleness_threshold_ms", cfg.staleness_threshold_ms);
    cfg.history_capacity = j.value("history_capacity", cfg.history_capacity);
    if (auto it = j.find("devices"); it != j.end()) {
      Registry reg;
      for (const auto& d : *it) reg.add(descriptor_from_json(d));
      cfg.registry = std::move(reg);
    }
    if (auto it = j.find("injection"); it != j.end()) cfg.injection = delay_injection_from_json(*it);
    if (auto it = j.find("persist_path"); it != j.end() && it->is_string()) cfg.persist_path = it->get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigInvalid) throw;
    throw Error(ErrorCode::ConfigInvalid, e.what());
  }
  if (cfg.registry.empty()) throw Error(ErrorCode::ConfigInvalid, "registry is empty");
  if (cfg.staleness_threshold_ms <= 0) throw Error(ErrorCode::ConfigInvalid, "staleness_threshold_ms must be > 0");
  if (cfg.history_capacity == 0) throw Error(ErrorCode::ConfigInvalid, "history_capacity must be > 0");
  return cfg;
}

LatestStore::LatestStore(const Registry& registry, std::size_t history_capacity)
    : capacity_(std::max<std::size_t>(history_capacity, 1)) {
  for (const auto& d : registry.devices()) slots_.emplace(d.device_id, std::make_unique<Slot>());
}

bool LatestStore::put(const SensorReading& reading) {
  auto it = slots_.find(reading.device_id);
  if (it == slots_.end()) return false;
  Slot& slot = *it->second;
  std::lock_guard lock(slot.mu);
  slot.history.push_back(reading);
  if (slot.history.size() > capacity_) slot.history.pop_front();
  // Ties go to the later arrival.
  if (!slot.latest || reading.timestamp_ms >= slot.latest->timestamp_ms) {
    slot.latest = reading;
    return true;
  }
  return false;
}

std::optional<SensorReading> LatestStore::latest(const std::string& device_id) const {
  auto it = slots_.find(device_id);
  if (it == slots_.end()) return std::nullopt;
  std::lock_guard lock(it->second->mu);
  return it->second->latest;
}

std::vector<SensorReading> LatestStore::history(const std::string& device_id) const {
  auto it = slots_.find(device_id);
  if (it == slots_.end()) return {};
  std::lock_guard lock(it->second->mu);
  return {it->second->history.begin(), it->second->history.end()};
}

Platform::Platform(PlatformConfig cfg, std::shared_ptr<Clock> clock)
    : cfg_(std::move(cfg)), clock_(std::move(clock)), store_(cfg_.registry, cfg_.history_capacity) {
  if (cfg_.persist_path) {
    load_persisted();
    persist_.open(*cfg_.persist_path, std::ios::app);
    if (!persist_) throw Error(ErrorCode::ConfigInvalid, "cannot open persist_path " + *cfg_.persist_path);
  }
}

void Platform::load_persisted() {
  std::ifstream in(*cfg_.persist_path);
  std::string line;
  std::size_t loaded = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      auto r = deserialize_reading(line);
      if (!validate_reading(r, cfg_.registry)) {
        store_.put(r);
        ++loaded;
      }
    } catch (const Error& e) {
      spdlog::warn("skipping persisted line: {}", e.what());
    }
  }
  if (loaded > 0) spdlog::info("replayed {} persisted readings", loaded);
}

IngestResult Platform::ingest(const SensorReading& reading) {
  IngestResult result;
  result.received_ms = clock_->now_ms();
  if (auto rej = validate_reading(reading, cfg_.registry)) {
    result.rejection = std::move(rej);
    return result;
  }
  store_.put(reading);
  if (persist_.is_open()) {
    std::lock_guard lock(persist_mu_);
    persist_ << serialize_reading(reading) << '\n';
    persist_.flush();
  }
  result.accepted = true;
  return result;
}

SensorReading Platform::query_latest(const std::string& device_id) const {
  if (cfg_.registry.find(device_id) == nullptr) throw Error(ErrorCode::UnknownDevice, device_id);
  auto latest = store_.latest(device_id);
  if (!latest) throw Error(ErrorCode::NoData, device_id);
  return *latest;
}

ZoneSnapshot Platform::query_zone(const std::string& zone_id) const {
  auto devices = cfg_.registry.zone_devices(zone_id);
  if (devices.empty()) throw Error(ErrorCode::UnknownZone, zone_id);
  std::vector<SensorReading> readings;
  for (const auto& d : devices) {
    if (auto r = store_.latest(d.device_id)) readings.push_back(std::move(*r));
  }
  return make_snapshot(zone_id, clock_->now_ms(), readings, cfg_.staleness_threshold_ms);
}

PlatformServer::PlatformServer(std::shared_ptr<Platform> platform)
    : platform_(std::move(platform)), http_(std::make_unique<HttpService>("platform-sim")) {
  const auto& inj = platform_->config().injection;
  for (DeviceKind kind : kAllDeviceKinds) {
    auto hop = kind == DeviceKind::Iaq ? Hop::ServiceIaq : kind == DeviceKind::Fan ? Hop::ServiceFan : Hop::ServiceWeather;
    service_samplers_[kind] = std::make_unique<DelaySampler>(inj.service_for(kind), seed_for(inj.seed, hop));
  }
  install_routes();
}

PlatformServer::~PlatformServer() { stop(); }

void PlatformServer::start(const std::string& host, int port) { http_->start(host, port); }
void PlatformServer::stop() { http_->stop(); }
int PlatformServer::port() const { return http_->port(); }
std::string PlatformServer::base_url() const { return http_->base_url(); }

PlatformCounters PlatformServer::counters() const {
  return {ingest_count_.load(), latest_count_.load(), snapshot_count_.load(), devices_count_.load()};
}

void PlatformServer::service_delay(DeviceKind kind) { service_samplers_.at(kind)->apply(); }

void PlatformServer::install_routes() {
  auto& svr = http_->server();

  svr.Post("/api/v1/ingest", [this](const httplib::Request& req, httplib::Response& res) {
    ++ingest_count_;
    SensorReading reading;
    try {
      reading = deserialize_reading(req.body);
    } catch (const Error& e) {
      send_error(res, e, "rejected");
      return;
    }
    auto result = platform_->ingest(reading);
    if (!result.accepted) {
      send_error(res, result.rejection->code, result.rejection->field, "rejected");
      return;
    }
    send_json(res, {{"status", "accepted"}, {"received_ms", result.received_ms}});
  });

  svr.Get("/api/v1/devices", [this](const httplib::Request&, httplib::Response& res) {
    ++devices_count_;
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& d : platform_->registry().devices()) arr.push_back(descriptor_to_json(d));
    send_json(res, arr);
  });

  svr.Get(R"(/api/v1/devices/([^/]+)/latest)", [this](const httplib::Request& req, httplib::Response& res) {
    ++latest_count_;
    const std::string id = req.matches[1];
    if (const auto* d = platform_->registry().find(id)) service_delay(d->kind);
    try {
      auto reading = platform_->query_latest(id);
      res.set_header("X-Served-Ms", std::to_string(platform_->clock().now_ms()));
      send_json(res, reading_to_json(reading));
    } catch (const Error& e) {
      send_error(res, e);
    }
  });

  svr.Get(R"(/api/v1/zones/([^/]+)/snapshot)", [this](const httplib::Request& req, httplib::Response& res) {
    ++snapshot_count_;
    const std::string zone = req.matches[1];
    // A zone query costs as much as its slowest device kind.
    auto devices = platform_->registry().zone_devices(zone);
    std::optional<DeviceKind> slowest;
    double slowest_mean = -1.0;
    for (const auto& d : devices) {
      double m = platform_->config().injection.service_for(d.kind).mean_ms;
      if (m > slowest_mean) {
        slowest_mean = m;
        slowest = d.kind;
      }
    }
    if (slowest) service_delay(*slowest);
    try {
      auto snap = platform_->query_zone(zone);
      res.set_header("X-Served-Ms", std::to_string(platform_->clock().now_ms()));
      send_json(res, snapshot_to_json(snap));
    } catch (const Error& e) {
      send_error(res, e);
    }
  });

  svr.Get("/api/v1/health", [this](const httplib::Request&, httplib::Response& res) {
    auto c = counters();
    send_json(res, {{"status", "ok"},
                    {"devices", platform_->registry().size()},
                    {"requests", {{"ingest", c.ingest}, {"latest", c.latest}, {"snapshot", c.snapshot}}}});
  });
}

}  // namespace twinbridge
