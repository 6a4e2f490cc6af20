#include "twinbridge/twin.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "twinbridge/codec.hpp"
#include "twinbridge/http_service.hpp"

namespace twinbridge {

nlohmann::json twin_update_to_json(const TwinUpdate& u) {
  return {{"zone_id", u.zone_id},
          {"snapshot", snapshot_to_json(u.snapshot)},
          {"viz", viz_to_json(u.viz)},
          {"relay_sent_ms", u.relay_sent_ms}};
}

TwinUpdate twin_update_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::BadType, "update");
  for (const char* key : {"zone_id", "snapshot", "viz", "relay_sent_ms"}) {
    if (!j.contains(key) || j[key].is_null()) throw Error(ErrorCode::MissingField, key);
  }
  if (!j["zone_id"].is_string()) throw Error(ErrorCode::BadType, "zone_id");
  if (!j["relay_sent_ms"].is_number_integer()) throw Error(ErrorCode::BadType, "relay_sent_ms");
  TwinUpdate u;
  u.zone_id = j["zone_id"].get<std::string>();
  u.snapshot = snapshot_from_json(j["snapshot"]);
  u.viz = viz_from_json(j["viz"]);
  u.relay_sent_ms = j["relay_sent_ms"].get<TimestampMs>();
  return u;
}

nlohmann::json twin_state_to_json(const TwinEnvironmentState& s) {
  return {{"zone_id", s.zone_id},
          {"sequence_no", s.sequence_no},
          {"applied_ms", s.applied_ms},
          {"update", s.update ? twin_update_to_json(*s.update) : nlohmann::json(nullptr)}};
}

TwinEnvironmentState twin_state_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::BadType, "state");
  TwinEnvironmentState s;
  s.zone_id = j.at("zone_id").get<std::string>();
  s.sequence_no = j.at("sequence_no").get<std::uint64_t>();
  s.applied_ms = j.at("applied_ms").get<TimestampMs>();
  if (auto it = j.find("update"); it != j.end() && !it->is_null()) s.update = twin_update_from_json(*it);
  return s;
}

nlohmann::json twin_event_to_json(const TwinEvent& e) {
  return {{"event", "update"},
          {"sequence_no", e.sequence_no},
          {"applied_ms", e.applied_ms},
          {"update", twin_update_to_json(e.update)}};
}

TwinEvent twin_event_from_json(const nlohmann::json& j) {
  TwinEvent e;
  e.sequence_no = j.at("sequence_no").get<std::uint64_t>();
  e.applied_ms = j.at("applied_ms").get<TimestampMs>();
  e.update = twin_update_from_json(j.at("update"));
  return e;
}

Subscription::Subscription(std::string zone_id, std::size_t capacity)
    : zone_id_(std::move(zone_id)), capacity_(capacity) {}

void Subscription::publish(const TwinEvent& event) {
  {
    std::lock_guard lock(mu_);
    if (closed_ || lagged_) return;
    if (queue_.size() >= capacity_) {
      lagged_ = true;
    } else {
      queue_.push_back(event);
    }
  }
  cv_.notify_all();
}

std::optional<TwinEvent> Subscription::next(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [this] { return !queue_.empty() || lagged_ || closed_; });
  if (!queue_.empty()) {
    TwinEvent e = std::move(queue_.front());
    queue_.pop_front();
    return e;
  }
  if (lagged_) throw Error(ErrorCode::SubscriberLagged, zone_id_);
  return std::nullopt;
}

bool Subscription::lagged() const {
  std::lock_guard lock(mu_);
  return lagged_;
}

void Subscription::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool Subscription::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

TwinStore::TwinStore(VizConfig viz_cfg, std::vector<std::string> zones, std::shared_ptr<Clock> clock,
                     std::size_t subscriber_buffer)
    : viz_cfg_(viz_cfg), clock_(std::move(clock)), subscriber_buffer_(subscriber_buffer) {
  for (auto& z : zones) {
    auto zone = std::make_unique<Zone>();
    zone->state.zone_id = z;
    zones_.emplace(std::move(z), std::move(zone));
  }
}

TwinStore::Zone* TwinStore::find_zone(const std::string& zone_id) const {
  std::lock_guard lock(zones_mu_);
  auto it = zones_.find(zone_id);
  return it == zones_.end() ? nullptr : it->second.get();
}

TwinStore::Zone& TwinStore::zone_for_write(const std::string& zone_id) {
  std::lock_guard lock(zones_mu_);
  auto& slot = zones_[zone_id];
  if (!slot) {
    slot = std::make_unique<Zone>();
    slot->state.zone_id = zone_id;
  }
  return *slot;
}

ApplyResult TwinStore::apply_update(const TwinUpdate& update) {
  ApplyResult result;
  if (update.zone_id.empty() || update.snapshot.zone_id != update.zone_id) {
    result.reason = ErrorCode::BadType;
    return result;
  }
  // Recompute outside the lock; compose is pure.
  if (!viz_equivalent(compose(update.snapshot, viz_cfg_), update.viz, 1e-9)) {
    result.reason = ErrorCode::VizMismatch;
    return result;
  }
  Zone& zone = zone_for_write(update.zone_id);
  std::lock_guard lock(zone.mu);
  auto& state = zone.state;
  if (state.update && update.relay_sent_ms < state.update->relay_sent_ms) {
    result.reason = ErrorCode::StaleUpdate;
    result.sequence_no = state.sequence_no;
    return result;
  }
  ++state.sequence_no;
  state.applied_ms = clock_->now_ms();
  state.update = update;
  TwinEvent event{state.sequence_no, state.applied_ms, update};
  auto& subs = zone.subscribers;
  subs.erase(std::remove_if(subs.begin(), subs.end(),
                            [](const std::weak_ptr<Subscription>& w) {
                              auto s = w.lock();
                              return !s || s->closed() || s->lagged();
                            }),
             subs.end());
  for (auto& w : subs) {
    if (auto s = w.lock()) s->publish(event);
  }
  result.applied = true;
  result.sequence_no = state.sequence_no;
  return result;
}

TwinEnvironmentState TwinStore::get_state(const std::string& zone_id) const {
  Zone* zone = find_zone(zone_id);
  if (zone == nullptr) throw Error(ErrorCode::UnknownZone, zone_id);
  std::lock_guard lock(zone->mu);
  return zone->state;
}

std::shared_ptr<Subscription> TwinStore::subscribe(const std::string& zone_id, std::uint64_t* start_sequence) {
  Zone* zone = find_zone(zone_id);
  if (zone == nullptr) throw Error(ErrorCode::UnknownZone, zone_id);
  auto sub = std::make_shared<Subscription>(zone_id, subscriber_buffer_);
  std::lock_guard lock(zone->mu);
  zone->subscribers.push_back(sub);
  if (start_sequence != nullptr) *start_sequence = zone->state.sequence_no;
  return sub;
}

std::vector<std::string> TwinStore::zones() const {
  std::lock_guard lock(zones_mu_);
  std::vector<std::string> out;
  for (const auto& [name, _] : zones_) out.push_back(name);
  return out;
}

nlohmann::json twin_config_to_json(const TwinConfig& cfg) {
  return {{"host", cfg.host},
          {"port", cfg.port},
          {"zones", cfg.zones},
          {"subscriber_buffer", cfg.subscriber_buffer},
          {"viz", viz_config_to_json(cfg.viz)}};
}

TwinConfig twin_config_from_json(const nlohmann::json& j) {
  TwinConfig cfg;
  if (j.is_null()) return cfg;
  if (!j.is_object()) throw Error(ErrorCode::ConfigInvalid, "twin config must be an object");
  try {
    cfg.host = j.value("host", cfg.host);
    cfg.port = j.value("port", cfg.port);
    cfg.zones = j.value("zones", cfg.zones);
    cfg.subscriber_buffer = j.value("subscriber_buffer", cfg.subscriber_buffer);
    if (j.contains("viz")) cfg.viz = viz_config_from_json(j["viz"]);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, e.what());
  }
  if (cfg.subscriber_buffer == 0) throw Error(ErrorCode::ConfigInvalid, "subscriber_buffer must be > 0");
  return cfg;
}

TwinServer::TwinServer(std::shared_ptr<TwinStore> store, std::chrono::milliseconds heartbeat)
    : store_(std::move(store)), http_(std::make_unique<HttpService>("twin-state")), heartbeat_(heartbeat) {
  install_routes();
}

TwinServer::~TwinServer() { stop(); }

void TwinServer::start(const std::string& host, int port) { http_->start(host, port); }
void TwinServer::stop() { http_->stop(); }
int TwinServer::port() const { return http_->port(); }
std::string TwinServer::base_url() const { return http_->base_url(); }

void TwinServer::install_routes() {
  auto& svr = http_->server();

  svr.Post(R"(/twin/v1/zones/([^/]+)/update)", [this](const httplib::Request& req, httplib::Response& res) {
    ++updates_received_;
    const std::string zone = req.matches[1];
    TwinUpdate update;
    try {
      update = twin_update_from_json(parse_json(req.body));
    } catch (const Error& e) {
      send_error(res, e, "rejected");
      return;
    } catch (const nlohmann::json::exception& e) {
      send_error(res, ErrorCode::BadType, e.what(), "rejected");
      return;
    }
    if (update.zone_id != zone) {
      send_error(res, ErrorCode::BadType, "zone_id does not match path", "rejected");
      return;
    }
    auto result = store_->apply_update(update);
    if (!result.applied) {
      nlohmann::json body{{"status", "rejected"}, {"reason", std::string(to_string(*result.reason))}};
      if (*result.reason == ErrorCode::StaleUpdate) body["sequence_no"] = result.sequence_no;
      send_json(res, body, http_status_for(*result.reason));
      return;
    }
    send_json(res, {{"status", "applied"}, {"sequence_no", result.sequence_no}});
  });

  svr.Get(R"(/twin/v1/zones/([^/]+)/state)", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      send_json(res, twin_state_to_json(store_->get_state(req.matches[1])));
    } catch (const Error& e) {
      send_error(res, e);
    }
  });

  svr.Get(R"(/twin/v1/zones/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string zone = req.matches[1];
    std::shared_ptr<Subscription> sub;
    std::uint64_t start_seq = 0;
    try {
      sub = store_->subscribe(zone, &start_seq);
    } catch (const Error& e) {
      send_error(res, e);
      return;
    }
    auto greeted = std::make_shared<bool>(false);
    res.set_chunked_content_provider(
        "application/x-ndjson",
        [this, sub, start_seq, greeted, zone](std::size_t, httplib::DataSink& sink) {
          auto write_line = [&sink](const nlohmann::json& j) {
            std::string line = j.dump() + "\n";
            return sink.write(line.data(), line.size());
          };
          if (!*greeted) {
            *greeted = true;
            return write_line({{"event", "subscribed"}, {"zone_id", zone}, {"sequence_no", start_seq}});
          }
          if (http_->stopping()) {
            sink.done();
            return true;
          }
          try {
            auto event = sub->next(heartbeat_);
            if (!event) return write_line({{"event", "heartbeat"}});
            return write_line(twin_event_to_json(*event));
          } catch (const Error& e) {
            write_line({{"event", "lagged"}, {"reason", std::string(to_string(e.code()))}});
            sink.done();
            return true;
          }
        },
        [sub](bool) { sub->close(); });
  });

  svr.Get("/twin/v1/health", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, {{"status", "ok"}, {"zones", store_->zones()}, {"updates_received", updates_received_.load()}});
  });
}

EventStreamClient::EventStreamClient(std::string base_url, std::string zone_id, Callback on_line)
    : base_url_(std::move(base_url)), zone_id_(std::move(zone_id)), on_line_(std::move(on_line)) {}

EventStreamClient::~EventStreamClient() { stop(); }

void EventStreamClient::start() {
  if (thread_.joinable()) return;
  stop_ = false;
  finished_ = false;
  thread_ = std::thread([this] {
    httplib::Client cli(base_url_);
    cli.set_read_timeout(std::chrono::seconds(10));
    std::string buffer;
    cli.Get("/twin/v1/zones/" + zone_id_ + "/events", [&](const char* data, std::size_t len) {
      buffer.append(data, len);
      std::size_t pos;
      while ((pos = buffer.find('\n')) != std::string::npos) {
        std::string line = buffer.substr(0, pos);
        buffer.erase(0, pos + 1);
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) continue;
        if (j.value("event", "") == "heartbeat") continue;
        on_line_(j);
      }
      return !stop_.load();
    });
    finished_ = true;
  });
}

void EventStreamClient::stop() {
  stop_ = true;
  if (thread_.joinable()) thread_.join();
}

}  // namespace twinbridge
