// twin-state: authoritative per-zone state with a live event stream.
//
//   twin_state [--config twin.json] [--port 8083]

#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "twinbridge/topology.hpp"
#include "twinbridge/twin.hpp"

using namespace twinbridge;

int main(int argc, char** argv) {
  block_termination_signals();
  CLI::App app{"twin-state: zone state store and event stream"};
  std::string config_path, host, log_level = "info";
  std::optional<int> port;
  app.add_option("--config", config_path, "twin or topology JSON")->check(CLI::ExistingFile);
  app.add_option("--host", host, "listen address");
  app.add_option("--port", port, "listen port (0 picks one)");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    TwinConfig cfg;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      auto j = nlohmann::json::parse(in, nullptr, false);
      if (j.is_discarded()) throw Error(ErrorCode::ConfigInvalid, "malformed JSON in " + config_path);
      cfg = j.contains("platform") ? topology_config_from_json(j).twin : twin_config_from_json(j);
    }
    if (!host.empty()) cfg.host = host;
    if (port) cfg.port = *port;

    auto store = std::make_shared<TwinStore>(cfg.viz, cfg.zones, system_clock(), cfg.subscriber_buffer);
    TwinServer server(store);
    server.start(cfg.host, cfg.port);
    std::cout << "twin " << server.base_url() << std::endl;
    wait_for_termination_signal();
    server.stop();
  } catch (const Error& e) {
    std::cerr << "twin_state: " << e.what() << "\n";
    return e.code() == ErrorCode::ConfigInvalid ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "twin_state: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
