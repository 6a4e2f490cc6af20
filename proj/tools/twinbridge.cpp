// twinbridge: launch the whole pipeline, or inspect a zone's twin state.
//
//   twinbridge up [--config topology.json] [--preset paper] [--seed 42]
//   twinbridge snapshot --zone kpark [--json] [--twin-url URL | --config topology.json]
//   twinbridge config            print the default topology as JSON
//
// Exit codes: 0 ok, 1 runtime error, 2 usage or configuration error.

#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "twinbridge/http_service.hpp"
#include "twinbridge/topology.hpp"

using namespace twinbridge;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::ConfigInvalid:
    case ErrorCode::UnknownZone:
    case ErrorCode::MalformedJson:
      return kExitUsage;
    default:
      return kExitRuntime;
  }
}

TopologyConfig resolve_config(const std::string& path) {
  return path.empty() ? TopologyConfig{} : load_topology_config(path);
}

int cmd_up(const std::string& config_path, const std::optional<std::string>& preset,
           const std::optional<std::uint64_t>& seed, const std::optional<std::string>& log_level) {
  TopologyConfig cfg = resolve_config(config_path);
  if (preset) cfg.preset = *preset;
  if (seed) {
    cfg.seed = *seed;
    cfg.scenario.seed = *seed;
  }
  if (log_level) cfg.log_level = *log_level;
  cfg.validate();
  spdlog::set_level(spdlog::level::from_str(cfg.log_level));

  Topology topo(cfg);
  topo.up();
  fmt::print("platform {}\nrelay    {}\ntwin     {}\n", topo.platform_url(), topo.relay_url(), topo.twin_url());
  fmt::print("ready\n");
  std::fflush(stdout);
  int sig = wait_for_termination_signal();
  spdlog::info("signal {} received, shutting down", sig);
  topo.shutdown();
  return 0;
}

int cmd_snapshot(const std::string& zone, bool as_json, std::string twin_url, const std::string& config_path) {
  if (twin_url.empty()) {
    TopologyConfig cfg = resolve_config(config_path);
    twin_url = fmt::format("http://{}:{}", cfg.twin.host, cfg.twin.port);
  }
  auto res = http_get_json(twin_url, "/twin/v1/zones/" + zone + "/state", std::chrono::seconds(10));
  if (!res) throw Error(ErrorCode::Unreachable, twin_url);
  if (res->status != 200) {
    auto reason = reason_of(res->body);
    throw Error(reason.value_or(ErrorCode::OriginError), res->body.value("detail", zone));
  }
  if (as_json) {
    std::cout << res->body.dump(2) << "\n";
  } else {
    std::cout << render_state(twin_state_from_json(res->body));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  block_termination_signals();

  CLI::App app{"twinbridge: platform simulator, relay and twin state in one process"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> log_level;
  auto* up = app.add_subcommand("up", "start every service and run until SIGINT/SIGTERM");
  up->add_option("--config", config_path, "topology JSON file")->check(CLI::ExistingFile);
  up->add_option("--preset", preset, "delay preset (none or paper)");
  up->add_option("--seed", seed, "seed for delays and the synthetic building");
  up->add_option("--log-level", log_level, "trace, debug, info, warn, error");

  std::string zone;
  bool as_json = false;
  std::string twin_url;
  auto* snap = app.add_subcommand("snapshot", "print the twin state of a zone");
  snap->add_option("--zone", zone, "zone id")->required();
  snap->add_flag("--json", as_json, "print raw JSON");
  snap->add_option("--twin-url", twin_url, "twin-state base URL");
  snap->add_option("--config", config_path, "topology JSON file, used to locate the twin");

  auto* cfg_cmd = app.add_subcommand("config", "print the default topology configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*up) return cmd_up(config_path, preset, seed, log_level);
    if (*snap) return cmd_snapshot(zone, as_json, twin_url, config_path);
    if (*cfg_cmd) {
      std::cout << topology_config_to_json(TopologyConfig{}).dump(2) << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "twinbridge: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "twinbridge: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
