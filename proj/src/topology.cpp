#include "twinbridge/topology.hpp"

#include <csignal>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "twinbridge/codec.hpp"
#include "twinbridge/http_service.hpp"

namespace twinbridge {

void TopologyConfig::validate() const {
  if (!DelayInjection::preset_exists(preset)) throw Error(ErrorCode::ConfigInvalid, "unknown preset " + preset);
  std::set<std::string> seen;
  for (auto [host, port] : {std::pair{platform.host, platform.port}, std::pair{relay.host, relay.port},
                            std::pair{twin.host, twin.port}}) {
    if (port < 0 || port > 65535) throw Error(ErrorCode::ConfigInvalid, fmt::format("bad port {}", port));
    if (port == 0) continue;  // ephemeral ports never collide
    auto key = fmt::format("{}:{}", host, port);
    if (!seen.insert(key).second) throw Error(ErrorCode::ConfigInvalid, "duplicate listen address " + key);
  }
  if (platform.registry.empty()) throw Error(ErrorCode::ConfigInvalid, "registry is empty");
  relay.validate();
  viz.validate();
  scenario.validate();
}

nlohmann::json topology_config_to_json(const TopologyConfig& cfg) {
  return {{"platform", platform_config_to_json(cfg.platform)},
          {"relay", relay_config_to_json(cfg.relay)},
          {"twin", twin_config_to_json(cfg.twin)},
          {"scenario", scenario_config_to_json(cfg.scenario)},
          {"viz", viz_config_to_json(cfg.viz)},
          {"preset", cfg.preset},
          {"seed", cfg.seed},
          {"log_level", cfg.log_level},
          {"scenario_enabled", cfg.scenario_enabled}};
}

TopologyConfig topology_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigInvalid, "topology config must be an object");
  TopologyConfig cfg;
  try {
    cfg.platform = platform_config_from_json(j.value("platform", nlohmann::json()));
    cfg.relay = relay_config_from_json(j.value("relay", nlohmann::json()));
    cfg.twin = twin_config_from_json(j.value("twin", nlohmann::json()));
    cfg.viz = viz_config_from_json(j.value("viz", nlohmann::json()));
    cfg.scenario = scenario_config_from_json(j.value("scenario", nlohmann::json()), cfg.platform.registry);
    cfg.preset = j.value("preset", cfg.preset);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.log_level = j.value("log_level", cfg.log_level);
    cfg.scenario_enabled = j.value("scenario_enabled", cfg.scenario_enabled);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, e.what());
  }
  // Zones follow the registry unless the relay section names them.
  bool relay_names_zones = j.contains("relay") && j["relay"].is_object() && j["relay"].contains("zones");
  if (!relay_names_zones) cfg.relay.zones = cfg.platform.registry.zones();
  bool twin_names_zones = j.contains("twin") && j["twin"].is_object() && j["twin"].contains("zones");
  if (!twin_names_zones) cfg.twin.zones = cfg.relay.zones;
  cfg.twin.viz = cfg.viz;
  cfg.validate();
  return cfg;
}

TopologyConfig load_topology_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot read " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::ConfigInvalid, "malformed JSON in " + path);
  return topology_config_from_json(j);
}

Topology::Topology(TopologyConfig cfg, std::shared_ptr<Clock> clock)
    : cfg_(std::move(cfg)), clock_(std::move(clock)) {
  cfg_.validate();
  injection_ = DelayInjection::from_preset(cfg_.preset, cfg_.seed);
}

Topology::~Topology() { shutdown(); }

void Topology::up(std::chrono::milliseconds startup_timeout) {
  if (running_) return;
  running_ = true;
  const auto deadline = std::chrono::steady_clock::now() + startup_timeout;
  auto remaining = [&] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
  };
  try {
    PlatformConfig pcfg = cfg_.platform;
    pcfg.injection = injection_;
    platform_ = std::make_shared<Platform>(pcfg, clock_);
    platform_server_ = std::make_unique<PlatformServer>(platform_);
    platform_server_->start(pcfg.host, pcfg.port);

    std::vector<std::string> zones = cfg_.twin.zones;
    twin_store_ = std::make_shared<TwinStore>(cfg_.viz, zones, clock_, cfg_.twin.subscriber_buffer);
    twin_server_ = std::make_unique<TwinServer>(twin_store_);
    twin_server_->start(cfg_.twin.host, cfg_.twin.port);

    RelayConfig rcfg = cfg_.relay;
    rcfg.platform_base_url = platform_server_->base_url();
    rcfg.twin_base_url = twin_server_->base_url();
    relay_ = std::make_shared<Relay>(rcfg, cfg_.viz, injection_, clock_);
    relay_server_ = std::make_unique<RelayServer>(relay_, injection_);
    relay_server_->start(rcfg.host, rcfg.port);

    const std::pair<std::string, std::string> checks[] = {
        {platform_url(), "/api/v1/health"}, {twin_url(), "/twin/v1/health"}, {relay_url(), "/relay/v1/health"}};
    for (const auto& [base, path] : checks) {
      if (!wait_until_healthy(base, path, remaining())) throw Error(ErrorCode::StartupTimeout, base + path);
    }

    if (cfg_.scenario_enabled) {
      scenario_ = std::make_unique<ScenarioRunner>(cfg_.scenario, http_ingest_sink(platform_url()), injection_.upload,
                                                   clock_);
      scenario_->start();
    }
    if (rcfg.push_enabled) relay_->start_push_loop();
    spdlog::info("topology up: platform {} relay {} twin {}", platform_url(), relay_url(), twin_url());
  } catch (...) {
    shutdown();
    throw;
  }
}

void Topology::shutdown() {
  if (!running_) return;
  running_ = false;
  if (scenario_) scenario_->stop();
  if (relay_) relay_->stop_push_loop();
  if (relay_server_) relay_server_->stop();
  if (twin_server_) twin_server_->stop();
  if (platform_server_) platform_server_->stop();
  spdlog::info("topology stopped");
}

std::string Topology::platform_url() const { return platform_server_ ? platform_server_->base_url() : ""; }
std::string Topology::relay_url() const { return relay_server_ ? relay_server_->base_url() : ""; }
std::string Topology::twin_url() const { return twin_server_ ? twin_server_->base_url() : ""; }

std::string render_state(const TwinEnvironmentState& state) {
  std::string out = fmt::format("zone        {}\nsequence_no {}\n", state.zone_id, state.sequence_no);
  if (!state.update) return out + "(no update applied yet)\n";
  const auto& u = *state.update;
  out += fmt::format("as_of       {}\nrelay_sent  {}\n", format_iso8601(u.snapshot.as_of_ms),
                     format_iso8601(u.relay_sent_ms));
  out += "\nreadings\n";
  for (const auto& [id, r] : u.snapshot.readings) {
    std::string values;
    std::visit(
        [&values](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, IaqPayload>) {
            values = fmt::format("{:.1f} °C  {:.1f} µg/m³  {:.0f} ppm", p.temperature_c, p.pm25_ugm3, p.co2_ppm);
          } else if constexpr (std::is_same_v<T, FanPayload>) {
            values = fmt::format("{:.1f} rpm", p.fan_rpm);
          } else {
            values = fmt::format("{:.1f} m/s  {:.0f} %", p.wind_mps, p.humidity_pct);
          }
        },
        r.payload);
    auto st = u.snapshot.stale.find(id);
    bool stale = st != u.snapshot.stale.end() && st->second;
    out += fmt::format("  {:<12} {:<8} {}{}\n", id, to_string(r.kind()), values, stale ? "  (stale)" : "");
  }
  out += "\nvisualization\n";
  if (u.viz.tint) {
    out += fmt::format("  tint alpha     {:.3f}{}\n", u.viz.tint->a, u.viz.degraded ? "  (degraded)" : "");
  } else {
    out += "  tint alpha     -\n";
  }
  out += fmt::format("  sound          {}\n", u.viz.sound_category ? to_string(*u.viz.sound_category) : "-");
  for (const auto& [id, rpm] : u.viz.fan_rpm_render) out += fmt::format("  fan {:<10} {:.1f} rpm\n", id, rpm);
  for (const auto& [label, text] : u.viz.numeric_displays) out += fmt::format("  {:<14} {}\n", label, text);
  return out;
}

void block_termination_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
}

int wait_for_termination_signal() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  int sig = 0;
  sigwait(&set, &sig);
  return sig;
}

}  // namespace twinbridge
