// platform-sim: the building sensor platform on its own.
//
//   platform_sim [--config platform.json] [--port 8081] [--preset paper] [--scenario]
//
// The config may be a platform section or a whole topology file.

#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "twinbridge/platform.hpp"
#include "twinbridge/scenario.hpp"
#include "twinbridge/topology.hpp"

using namespace twinbridge;

int main(int argc, char** argv) {
  block_termination_signals();
  CLI::App app{"platform-sim: sensor platform with ingest and query API"};
  std::string config_path, host, persist, log_level = "info";
  std::optional<int> port;
  std::optional<std::string> preset;
  std::uint64_t seed = 42;
  bool scenario = false;
  app.add_option("--config", config_path, "platform or topology JSON")->check(CLI::ExistingFile);
  app.add_option("--host", host, "listen address");
  app.add_option("--port", port, "listen port (0 picks one)");
  app.add_option("--preset", preset, "delay preset (none or paper)");
  app.add_option("--seed", seed, "seed for injected delays and the synthetic building");
  app.add_option("--persist", persist, "append-only JSONL file replayed on startup");
  app.add_flag("--scenario", scenario, "feed the platform from the synthetic building");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    PlatformConfig cfg;
    ScenarioConfig scfg = ScenarioConfig::defaults_for(cfg.registry, seed);
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      auto j = nlohmann::json::parse(in, nullptr, false);
      if (j.is_discarded()) throw Error(ErrorCode::ConfigInvalid, "malformed JSON in " + config_path);
      if (j.contains("platform")) {
        auto topo = topology_config_from_json(j);
        cfg = topo.platform;
        scfg = topo.scenario;
        if (!preset) preset = topo.preset;
      } else {
        cfg = platform_config_from_json(j);
        scfg = ScenarioConfig::defaults_for(cfg.registry, seed);
      }
    }
    if (!host.empty()) cfg.host = host;
    if (port) cfg.port = *port;
    if (!persist.empty()) cfg.persist_path = persist;
    cfg.injection = DelayInjection::from_preset(preset.value_or(cfg.injection.preset), seed);

    auto platform = std::make_shared<Platform>(cfg);
    PlatformServer server(platform);
    server.start(cfg.host, cfg.port);
    std::cout << "platform " << server.base_url() << std::endl;

    std::unique_ptr<ScenarioRunner> runner;
    if (scenario) {
      runner = std::make_unique<ScenarioRunner>(scfg, http_ingest_sink(server.base_url()), cfg.injection.upload);
      runner->start();
    }
    wait_for_termination_signal();
    if (runner) runner->stop();
    server.stop();
  } catch (const Error& e) {
    std::cerr << "platform_sim: " << e.what() << "\n";
    return e.code() == ErrorCode::ConfigInvalid ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "platform_sim: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
