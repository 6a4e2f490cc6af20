#include <doctest.h>

#include <csignal>

#include "../support/test_support.hpp"
#include "twinbridge/http_service.hpp"
#include "twinbridge/topology.hpp"

using namespace twinbridge;
using namespace std::chrono_literals;

namespace {

TopologyConfig ephemeral() {
  TopologyConfig cfg;
  cfg.platform.port = 0;
  cfg.relay.port = 0;
  cfg.twin.port = 0;
  return cfg;
}

std::string ports_config(int p, int r, int t) {
  return nlohmann::json{{"platform", {{"port", p}}}, {"relay", {{"port", r}}}, {"twin", {{"port", t}}},
                        {"log_level", "warn"}}
      .dump();
}

}  // namespace

TEST_SUITE("topology") {

TEST_CASE("config defaults and validation") {
  TopologyConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.preset = "turbo";
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("CONFIG_INVALID"), Error);
  cfg = TopologyConfig{};
  cfg.relay.port = cfg.platform.port;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK_NOTHROW(ephemeral().validate());

  auto parsed = topology_config_from_json(nlohmann::json::parse(R"({"preset": "paper", "relay": {"poll_interval_ms": 2000, "cache_ttl_ms": 1000}})"));
  CHECK(parsed.preset == "paper");
  CHECK(parsed.relay.poll_interval == 2000ms);
  CHECK(parsed.relay.zones == std::vector<std::string>{"kpark", "rooftop"});
  CHECK_THROWS_AS(topology_config_from_json(nlohmann::json::parse(R"({"relay": {"cache_ttl_ms": 9000}})")), Error);

  auto j = topology_config_to_json(TopologyConfig{});
  CHECK(topology_config_to_json(topology_config_from_json(j)) == j);
}

TEST_CASE("load_topology_config reports unreadable files") {
  CHECK_THROWS_WITH_AS(load_topology_config("/nonexistent/topology.json"), doctest::Contains("CONFIG_INVALID"), Error);
  auto path = tbtest::temp_path("bad") + ".json";
  tbtest::write_file(path, "{broken");
  CHECK_THROWS_WITH_AS(load_topology_config(path), doctest::Contains("CONFIG_INVALID"), Error);
  std::remove(path.c_str());
}

TEST_CASE("up, data flows into the twin, shutdown") {
  auto cfg = ephemeral();
  cfg.relay.poll_interval = 500ms;
  cfg.relay.cache_ttl = 0ms;
  cfg.scenario.interval_s = 0.5;
  Topology topo(cfg);
  auto t0 = std::chrono::steady_clock::now();
  topo.up();
  CHECK(std::chrono::steady_clock::now() - t0 < 5s);
  std::this_thread::sleep_for(2s);
  auto st = topo.twin_store().get_state("kpark");
  CHECK(st.sequence_no >= 2);
  REQUIRE(st.update);
  CHECK(st.update->snapshot.readings.size() == 15);
  CHECK_FALSE(check_viz_schema(viz_to_json(st.update->viz)));
  CHECK(render_state(st).find("kpark") != std::string::npos);
  topo.shutdown();
  topo.shutdown();
  CHECK_FALSE(http_get_json(topo.relay_url(), "/relay/v1/health", 300ms));
}

TEST_CASE("a taken port fails startup with PORT_IN_USE and rolls back") {
  HttpService squatter("squatter");
  squatter.start("127.0.0.1", 0);
  auto cfg = ephemeral();
  cfg.twin.port = squatter.port();
  Topology topo(cfg);
  CHECK_THROWS_WITH_AS(topo.up(), doctest::Contains("PORT_IN_USE"), Error);
  // The platform started before the failure must be stopped again.
  CHECK_FALSE(http_get_json(topo.platform_url(), "/api/v1/health", 300ms));
}

TEST_CASE("cli: up, snapshot, unknown zone, SIGTERM") {
  int p = tbtest::free_port(), r = tbtest::free_port(), t = tbtest::free_port();
  auto cfg_path = tbtest::temp_path("topology") + ".json";
  tbtest::write_file(cfg_path, ports_config(p, r, t));
  tbtest::Child up({TWINBRIDGE_BIN, "up", "--config", cfg_path}, tbtest::temp_path("up") + ".log");
  REQUIRE_MESSAGE(up.wait_for_output("ready", 10s), up.output());
  std::this_thread::sleep_for(500ms);

  auto log = tbtest::temp_path("snap") + ".log";
  CHECK(tbtest::run_command({TWINBRIDGE_BIN, "snapshot", "--zone", "kpark", "--config", cfg_path}, log) == 0);
  CHECK(tbtest::read_file(log).find("sequence_no") != std::string::npos);
  CHECK(tbtest::run_command({TWINBRIDGE_BIN, "snapshot", "--zone", "kpark", "--json", "--config", cfg_path}, log) == 0);
  CHECK(nlohmann::json::parse(tbtest::read_file(log))["zone_id"] == "kpark");
  CHECK(tbtest::run_command({TWINBRIDGE_BIN, "snapshot", "--zone", "atlantis", "--config", cfg_path}, log) == 2);
  CHECK(tbtest::read_file(log).find("UNKNOWN_ZONE") != std::string::npos);

  up.signal(SIGTERM);
  auto rc = up.wait_for(10s);
  REQUIRE(rc);
  CHECK(*rc == 0);

  // Nothing listening any more: runtime error.
  CHECK(tbtest::run_command({TWINBRIDGE_BIN, "snapshot", "--zone", "kpark", "--config", cfg_path}, log) == 1);
  std::remove(cfg_path.c_str());
}

TEST_CASE("cli: usage and config errors exit 2") {
  auto log = tbtest::temp_path("usage") + ".log";
  CHECK(tbtest::run_command({TWINBRIDGE_BIN, "frobnicate"}, log) == 2);
  CHECK(tbtest::run_command({TWINBRIDGE_BIN, "snapshot"}, log) == 2);
  auto bad = tbtest::temp_path("cfg") + ".json";
  tbtest::write_file(bad, R"({"preset": "warp"})");
  CHECK(tbtest::run_command({TWINBRIDGE_BIN, "up", "--config", bad}, log) == 2);
  CHECK(tbtest::run_command({BENCH_BIN, "run", "--kind", "toaster"}, log) == 2);
  std::remove(bad.c_str());
}

TEST_CASE("cli: bench run and table") {
  auto out = tbtest::temp_path("report") + ".json";
  auto log = tbtest::temp_path("bench") + ".log";
  REQUIRE(tbtest::run_command({BENCH_BIN, "run", "--kind", "fan", "--path", "direct", "--trials", "5", "--out", out},
                              log) == 0);
  auto report = nlohmann::json::parse(tbtest::read_file(out));
  CHECK(report["trials"] == 5);
  CHECK(report["raw_samples"].size() == 5);
  CHECK(tbtest::run_command({BENCH_BIN, "table", out}, log) == 0);
  CHECK(tbtest::read_file(log).find("Fan Sensor") != std::string::npos);
  std::remove(out.c_str());
}

}
