// relay: caching pass-through in front of the platform, pushing zone
// updates to the twin.
//
//   relay_server [--config relay.json] [--port 8082] --platform-url URL --twin-url URL

#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "twinbridge/relay.hpp"
#include "twinbridge/topology.hpp"

using namespace twinbridge;

int main(int argc, char** argv) {
  block_termination_signals();
  CLI::App app{"relay: caching relay and twin pusher"};
  std::string config_path, host, platform_url, twin_url, log_level = "info";
  std::optional<int> port;
  std::optional<std::string> preset;
  std::uint64_t seed = 42;
  bool no_push = false;
  app.add_option("--config", config_path, "relay or topology JSON")->check(CLI::ExistingFile);
  app.add_option("--host", host, "listen address");
  app.add_option("--port", port, "listen port (0 picks one)");
  app.add_option("--platform-url", platform_url, "platform base URL");
  app.add_option("--twin-url", twin_url, "twin-state base URL");
  app.add_option("--preset", preset, "delay preset (none or paper)");
  app.add_option("--seed", seed, "seed for injected delays");
  app.add_flag("--no-push", no_push, "serve requests only, do not push to the twin");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    RelayConfig cfg;
    VizConfig viz;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      auto j = nlohmann::json::parse(in, nullptr, false);
      if (j.is_discarded()) throw Error(ErrorCode::ConfigInvalid, "malformed JSON in " + config_path);
      if (j.contains("platform")) {
        auto topo = topology_config_from_json(j);
        cfg = topo.relay;
        viz = topo.viz;
        if (!preset) preset = topo.preset;
      } else {
        cfg = relay_config_from_json(j);
      }
    }
    if (!host.empty()) cfg.host = host;
    if (port) cfg.port = *port;
    if (!platform_url.empty()) cfg.platform_base_url = platform_url;
    if (!twin_url.empty()) cfg.twin_base_url = twin_url;
    if (no_push) cfg.push_enabled = false;
    cfg.validate();
    auto injection = DelayInjection::from_preset(preset.value_or("none"), seed);

    auto relay = std::make_shared<Relay>(cfg, viz, injection);
    RelayServer server(relay, injection);
    server.start(cfg.host, cfg.port);
    std::cout << "relay " << server.base_url() << std::endl;
    if (cfg.push_enabled) relay->start_push_loop();
    wait_for_termination_signal();
    relay->stop_push_loop();
    server.stop();
  } catch (const Error& e) {
    std::cerr << "relay_server: " << e.what() << "\n";
    return e.code() == ErrorCode::ConfigInvalid ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "relay_server: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
