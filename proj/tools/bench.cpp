// bench: retrieval latency over the direct and relay paths.
//
//   bench run --kind iaq --path relay --trials 100 --preset paper --seed 42 --out report.json
//   bench compare --kind iaq --trials 100 --preset paper [--out overhead.json]
//   bench table r1.json r2.json ...
//
// Without --platform-url/--relay-url the services are hosted in-process on
// ephemeral loopback ports.

#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "twinbridge/bench.hpp"
#include "twinbridge/error.hpp"

using namespace twinbridge;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Common {
  std::string kind = "iaq";
  std::size_t trials = 100;
  std::string preset = "none";
  std::uint64_t seed = 42;
  std::string out;
  std::string platform_url;
  std::string relay_url;
  long timeout_ms = 30000;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--kind", c.kind, "iaq, fan or weather")
      ->check(CLI::IsMember({"iaq", "fan", "weather"}, CLI::ignore_case));
  cmd->add_option("--trials", c.trials, "requests per path")->check(CLI::PositiveNumber);
  cmd->add_option("--preset", c.preset, "delay preset for the in-process services (none or paper)");
  cmd->add_option("--seed", c.seed, "seed for injected delays and bootstrap");
  cmd->add_option("--out", c.out, "write the JSON report here");
  cmd->add_option("--platform-url", c.platform_url, "benchmark an already running platform");
  cmd->add_option("--relay-url", c.relay_url, "benchmark an already running relay");
  cmd->add_option("--timeout-ms", c.timeout_ms, "per-request timeout")->check(CLI::PositiveNumber);
}

DeviceKind kind_of(const Common& c) {
  auto k = parse_device_kind(CLI::detail::to_lower(c.kind));
  if (!k) throw Error(ErrorCode::ConfigInvalid, "unknown kind " + c.kind);
  return *k;
}

bool external(const Common& c) { return !c.platform_url.empty() || !c.relay_url.empty(); }

BenchTargets external_targets(const Common& c) {
  if (c.platform_url.empty()) {
    throw Error(ErrorCode::ConfigInvalid, "--platform-url is required to list devices");
  }
  return {c.platform_url, c.relay_url.empty() ? c.platform_url : c.relay_url, std::chrono::milliseconds(c.timeout_ms)};
}

void write_json(const std::string& path, const nlohmann::json& j) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::ConfigInvalid, "cannot write " + path);
  out << j.dump(2) << "\n";
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot read " + path);
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::MalformedJson, path);
  return j;
}

int cmd_run(const Common& c, const std::string& path_name) {
  const auto kind = kind_of(c);
  const auto path = parse_path_kind(path_name).value();
  LatencyReport report;
  if (external(c)) {
    report = run_trials(external_targets(c), kind, path, c.trials);
  } else {
    BenchTopology topo(DelayInjection::from_preset(c.preset, c.seed));
    auto targets = topo.targets();
    targets.timeout = std::chrono::milliseconds(c.timeout_ms);
    report = run_trials(targets, kind, path, c.trials);
  }
  write_json(c.out, report_to_json(report));
  std::cout << render_table({report});
  return 0;
}

int cmd_compare(const Common& c, std::size_t resamples) {
  const auto kind = kind_of(c);
  OverheadReport r = external(c)
                         ? compare_paths(external_targets(c), kind, c.trials, c.seed, resamples)
                         : compare_paths(kind, c.trials, DelayInjection::from_preset(c.preset, c.seed), resamples);
  write_json(c.out, overhead_to_json(r));
  std::cout << render_table({r.relay, r.direct});
  fmt::print("\nrelay overhead: {:.1f} ms  (95% CI {:.1f} .. {:.1f}, {} resamples)\n", r.overhead_ms, r.ci.low,
             r.ci.high, r.resamples);
  return 0;
}

int cmd_table(const std::vector<std::string>& files) {
  std::vector<LatencyReport> all;
  for (const auto& f : files) {
    auto j = read_json(f);
    // Overhead files carry both paths.
    if (j.is_object() && j.contains("direct") && j.contains("relay")) {
      all.push_back(report_from_json(j["relay"]));
      all.push_back(report_from_json(j["direct"]));
      continue;
    }
    for (auto& r : reports_from_json(j)) all.push_back(std::move(r));
  }
  std::cout << render_table(all);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bench: direct vs relay retrieval latency"};
  app.require_subcommand(1);

  Common run_opts;
  std::string path_name = "relay";
  auto* run = app.add_subcommand("run", "time one path for one device kind");
  add_common(run, run_opts);
  run->add_option("--path", path_name, "relay or direct")->check(CLI::IsMember({"relay", "direct"}));

  Common cmp_opts;
  std::size_t resamples = 1000;
  auto* cmp = app.add_subcommand("compare", "time both paths and estimate the relay overhead");
  add_common(cmp, cmp_opts);
  cmp->add_option("--resamples", resamples, "bootstrap resamples")->check(CLI::PositiveNumber);

  std::vector<std::string> files;
  auto* table = app.add_subcommand("table", "render saved reports as a table");
  table->add_option("reports", files, "report JSON files")->required()->check(CLI::ExistingFile);

  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*run) return cmd_run(run_opts, path_name);
    if (*cmp) return cmd_compare(cmp_opts, resamples);
    if (*table) return cmd_table(files);
  } catch (const Error& e) {
    std::cerr << "bench: " << e.what() << "\n";
    bool usage = e.code() == ErrorCode::ConfigInvalid || e.code() == ErrorCode::MalformedJson ||
                 e.code() == ErrorCode::BadType || e.code() == ErrorCode::MissingField;
    return usage ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "bench: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
