#pragma once

// Whole-pipeline launcher: platform-sim, twin-state and relay in one
// process, plus the synthetic building feeding the platform.

#include <chrono>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "twinbridge/delay.hpp"
#include "twinbridge/platform.hpp"
#include "twinbridge/relay.hpp"
#include "twinbridge/scenario.hpp"
#include "twinbridge/twin.hpp"
#include "twinbridge/viz.hpp"

namespace twinbridge {

struct TopologyConfig {
  PlatformConfig platform;
  RelayConfig relay;
  TwinConfig twin;
  ScenarioConfig scenario = ScenarioConfig::defaults_for(Registry::default_topology());
  VizConfig viz;
  std::string preset = "none";
  std::uint64_t seed = 42;
  std::string log_level = "info";
  bool scenario_enabled = true;

  /// Distinct addresses, known preset, valid sub-configs.
  /// Throws Error(ConfigInvalid).
  void validate() const;
};

nlohmann::json topology_config_to_json(const TopologyConfig& cfg);
TopologyConfig topology_config_from_json(const nlohmann::json& j);
/// Throws Error(ConfigInvalid) for unreadable files or bad content.
TopologyConfig load_topology_config(const std::string& path);

class Topology {
 public:
  explicit Topology(TopologyConfig cfg, std::shared_ptr<Clock> clock = system_clock());
  ~Topology();

  Topology(const Topology&) = delete;
  Topology& operator=(const Topology&) = delete;

  /// Starts every service and waits for their health endpoints.
  /// Throws Error(PortInUse | StartupTimeout); on failure everything
  /// already started is stopped again.
  void up(std::chrono::milliseconds startup_timeout = std::chrono::seconds(5));
  /// Idempotent.
  void shutdown();

  std::string platform_url() const;
  std::string relay_url() const;
  std::string twin_url() const;
  const TopologyConfig& config() const { return cfg_; }

  Platform& platform() { return *platform_; }
  TwinStore& twin_store() { return *twin_store_; }
  Relay& relay() { return *relay_; }

 private:
  TopologyConfig cfg_;
  std::shared_ptr<Clock> clock_;
  DelayInjection injection_;
  std::shared_ptr<Platform> platform_;
  std::unique_ptr<PlatformServer> platform_server_;
  std::shared_ptr<TwinStore> twin_store_;
  std::unique_ptr<TwinServer> twin_server_;
  std::shared_ptr<Relay> relay_;
  std::unique_ptr<RelayServer> relay_server_;
  std::unique_ptr<ScenarioRunner> scenario_;
  bool running_ = false;
};

/// Aligned, human-readable dump of a zone's twin state.
std::string render_state(const TwinEnvironmentState& state);

/// Blocks SIGINT/SIGTERM for the calling thread and every thread it spawns
/// afterwards. Call first thing in main.
void block_termination_signals();
/// Waits for SIGINT or SIGTERM and returns the signal number.
int wait_for_termination_signal();

}  // namespace twinbridge
