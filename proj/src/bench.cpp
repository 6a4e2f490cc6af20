#include "twinbridge/bench.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>
#include <httplib.h>

#include "twinbridge/codec.hpp"
#include "twinbridge/http_service.hpp"
#include "twinbridge/platform.hpp"
#include "twinbridge/relay.hpp"
#include "twinbridge/scenario.hpp"
#include "twinbridge/viz.hpp"

namespace twinbridge {

std::string_view to_string(PathKind path) { return path == PathKind::Direct ? "direct" : "relay"; }

std::optional<PathKind> parse_path_kind(std::string_view text) {
  if (text == "direct") return PathKind::Direct;
  if (text == "relay") return PathKind::Relay;
  return std::nullopt;
}

SampleStats compute_stats(std::span<const double> samples) {
  if (samples.empty()) throw Error(ErrorCode::TargetUnreachable, "no samples");
  SampleStats s;
  double mean = 0.0, m2 = 0.0;
  s.min = samples.front();
  s.max = samples.front();
  for (double x : samples) {
    ++s.count;
    double delta = x - mean;
    mean += delta / static_cast<double>(s.count);
    m2 += delta * (x - mean);
    s.min = std::min(s.min, x);
    s.max = std::max(s.max, x);
  }
  s.mean = mean;
  s.std = s.count > 1 ? std::sqrt(m2 / static_cast<double>(s.count - 1)) : 0.0;
  return s;
}

LatencyReport make_report(DeviceKind kind, PathKind path, std::vector<double> samples, std::size_t failures) {
  LatencyReport r;
  r.device_kind = kind;
  r.path = path;
  r.failures = failures;
  r.trials = samples.size() + failures;
  if (!samples.empty()) {
    auto st = compute_stats(samples);
    r.mean_ms = st.mean;
    r.std_ms = st.std;
    r.min_ms = st.min;
    r.max_ms = st.max;
  }
  r.raw_samples = std::move(samples);
  return r;
}

nlohmann::json report_to_json(const LatencyReport& r) {
  return {{"device_kind", std::string(to_string(r.device_kind))},
          {"path", std::string(to_string(r.path))},
          {"trials", r.trials},
          {"failures", r.failures},
          {"mean_ms", r.mean_ms},
          {"std_ms", r.std_ms},
          {"min_ms", r.min_ms},
          {"max_ms", r.max_ms},
          {"raw_samples", r.raw_samples}};
}

LatencyReport report_from_json(const nlohmann::json& j) {
  try {
    LatencyReport r;
    auto kind = parse_device_kind(j.at("device_kind").get<std::string>());
    auto path = parse_path_kind(j.at("path").get<std::string>());
    if (!kind) throw Error(ErrorCode::BadType, "device_kind");
    if (!path) throw Error(ErrorCode::BadType, "path");
    r.device_kind = *kind;
    r.path = *path;
    r.trials = j.at("trials").get<std::size_t>();
    r.failures = j.value("failures", std::size_t{0});
    r.mean_ms = j.at("mean_ms").get<double>();
    r.std_ms = j.at("std_ms").get<double>();
    r.min_ms = j.at("min_ms").get<double>();
    r.max_ms = j.at("max_ms").get<double>();
    r.raw_samples = j.at("raw_samples").get<std::vector<double>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadType, e.what());
  }
}

nlohmann::json reports_to_json(const std::vector<LatencyReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) arr.push_back(report_to_json(r));
  return arr;
}

std::vector<LatencyReport> reports_from_json(const nlohmann::json& j) {
  std::vector<LatencyReport> out;
  if (j.is_array()) {
    for (const auto& r : j) out.push_back(report_from_json(r));
  } else {
    out.push_back(report_from_json(j));
  }
  return out;
}

std::vector<std::string> list_devices(const BenchTargets& targets, DeviceKind kind) {
  auto res = http_get_json(targets.platform_url, "/api/v1/devices", targets.timeout);
  if (!res || res->status != 200 || !res->body.is_array()) {
    throw Error(ErrorCode::TargetUnreachable, targets.platform_url);
  }
  std::vector<std::string> ids;
  for (const auto& d : res->body) {
    auto desc = descriptor_from_json(d);
    if (desc.kind == kind) ids.push_back(desc.device_id);
  }
  if (ids.empty()) throw Error(ErrorCode::UnknownDevice, fmt::format("no {} devices", to_string(kind)));
  return ids;
}

LatencyReport run_trials(const BenchTargets& targets, DeviceKind kind, PathKind path, std::size_t n) {
  if (n == 0) throw Error(ErrorCode::ConfigInvalid, "trials must be >= 1");
  const auto ids = list_devices(targets, kind);
  const std::string& base = path == PathKind::Direct ? targets.platform_url : targets.relay_url;
  std::vector<double> samples;
  samples.reserve(n);
  std::size_t failures = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string& id = ids[i % ids.size()];
    std::string target = path == PathKind::Direct ? "/api/v1/devices/" + id + "/latest" : "/relay/v1/devices/" + id;
    httplib::Client cli(base);
    cli.set_connection_timeout(targets.timeout);
    cli.set_read_timeout(targets.timeout);
    auto t0 = std::chrono::steady_clock::now();
    auto res = cli.Get(target);
    auto t1 = std::chrono::steady_clock::now();
    if (res && res->status == 200) {
      samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    } else {
      ++failures;
    }
  }
  if (samples.empty()) throw Error(ErrorCode::TargetUnreachable, base);
  return make_report(kind, path, std::move(samples), failures);
}

ConfidenceInterval bootstrap_mean_difference(std::span<const double> treatment, std::span<const double> baseline,
                                             std::size_t resamples, std::uint64_t seed, double level) {
  if (treatment.empty() || baseline.empty() || resamples == 0) return {};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_t(0, treatment.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_b(0, baseline.size() - 1);
  std::vector<double> diffs;
  diffs.reserve(resamples);
  for (std::size_t r = 0; r < resamples; ++r) {
    double st = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < treatment.size(); ++i) st += treatment[pick_t(rng)];
    for (std::size_t i = 0; i < baseline.size(); ++i) sb += baseline[pick_b(rng)];
    diffs.push_back(st / static_cast<double>(treatment.size()) - sb / static_cast<double>(baseline.size()));
  }
  std::sort(diffs.begin(), diffs.end());
  const double alpha = (1.0 - level) / 2.0;
  auto at = [&](double q) {
    auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(diffs.size() - 1)));
    return diffs[std::min(idx, diffs.size() - 1)];
  };
  return {at(alpha), at(1.0 - alpha)};
}

nlohmann::json overhead_to_json(const OverheadReport& r) {
  return {{"device_kind", std::string(to_string(r.device_kind))},
          {"overhead_ms", r.overhead_ms},
          {"ci_low_ms", r.ci.low},
          {"ci_high_ms", r.ci.high},
          {"resamples", r.resamples},
          {"direct", report_to_json(r.direct)},
          {"relay", report_to_json(r.relay)}};
}

BenchTopology::BenchTopology(const DelayInjection& injection, const Registry& registry) {
  PlatformConfig pcfg;
  pcfg.registry = registry;
  pcfg.injection = injection;
  platform_ = std::make_shared<Platform>(pcfg);
  // One reading per device so every latest query succeeds.
  ScenarioGenerator gen(ScenarioConfig::defaults_for(registry, injection.seed), platform_->clock().now_ms());
  for (const auto& r : gen.emit_next()) platform_->ingest(r);
  platform_server_ = std::make_unique<PlatformServer>(platform_);
  platform_server_->start("127.0.0.1", 0);

  RelayConfig rcfg;
  rcfg.platform_base_url = platform_server_->base_url();
  rcfg.cache_ttl = std::chrono::milliseconds(0);
  rcfg.coalesce = false;
  rcfg.push_enabled = false;
  relay_ = std::make_shared<Relay>(rcfg, VizConfig{}, injection);
  relay_server_ = std::make_unique<RelayServer>(relay_, injection);
  relay_server_->start("127.0.0.1", 0);
}

BenchTopology::~BenchTopology() {
  if (relay_server_) relay_server_->stop();
  if (platform_server_) platform_server_->stop();
}

BenchTargets BenchTopology::targets() const {
  return {platform_server_->base_url(), relay_server_->base_url()};
}

namespace {

OverheadReport finish_overhead(DeviceKind kind, LatencyReport direct, LatencyReport relay, std::uint64_t seed,
                               std::size_t resamples) {
  OverheadReport out;
  out.device_kind = kind;
  out.overhead_ms = relay.mean_ms - direct.mean_ms;
  out.ci = bootstrap_mean_difference(relay.raw_samples, direct.raw_samples, resamples, seed);
  out.resamples = resamples;
  out.direct = std::move(direct);
  out.relay = std::move(relay);
  return out;
}

}  // namespace

OverheadReport compare_paths(DeviceKind kind, std::size_t n, const DelayInjection& injection, std::size_t resamples) {
  LatencyReport direct, relay;
  {
    BenchTopology topo(injection);
    direct = run_trials(topo.targets(), kind, PathKind::Direct, n);
  }
  {
    BenchTopology topo(injection);
    relay = run_trials(topo.targets(), kind, PathKind::Relay, n);
  }
  return finish_overhead(kind, std::move(direct), std::move(relay), injection.seed, resamples);
}

OverheadReport compare_paths(const BenchTargets& targets, DeviceKind kind, std::size_t n, std::uint64_t seed,
                             std::size_t resamples) {
  auto direct = run_trials(targets, kind, PathKind::Direct, n);
  auto relay = run_trials(targets, kind, PathKind::Relay, n);
  return finish_overhead(kind, std::move(direct), std::move(relay), seed, resamples);
}

namespace {

std::string group_thousands(long long v) {
  std::string digits = std::to_string(v < 0 ? -v : v);
  std::string out;
  int count = 0;
  for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
    if (count > 0 && count % 3 == 0) out.insert(out.begin(), ',');
    out.insert(out.begin(), *it);
    ++count;
  }
  return v < 0 ? "-" + out : out;
}

// Three significant digits, without switching to exponent notation.
std::string format_spread(double v) {
  if (v >= 100.0) return group_thousands(std::llround(v));
  return fmt::format("{:.3g}", v);
}

int kind_rank(DeviceKind k) {
  switch (k) {
    case DeviceKind::Iaq:
      return 0;
    case DeviceKind::Fan:
      return 1;
    case DeviceKind::Weather:
      return 2;
  }
  return 3;
}

}  // namespace

std::string render_table(const std::vector<LatencyReport>& reports) {
  std::vector<const LatencyReport*> rows;
  for (const auto& r : reports) rows.push_back(&r);
  std::stable_sort(rows.begin(), rows.end(), [](const LatencyReport* a, const LatencyReport* b) {
    if (kind_rank(a->device_kind) != kind_rank(b->device_kind)) return kind_rank(a->device_kind) < kind_rank(b->device_kind);
    return a->path == PathKind::Relay && b->path == PathKind::Direct;
  });
  std::string out = fmt::format("{:<16} {:<7} {:>7}  {}\n", "Device", "Path", "Trials", "Response Time [ms]");
  out += std::string(56, '-') + "\n";
  for (const auto* r : rows) {
    std::string cell = group_thousands(std::llround(r->mean_ms));
    std::size_t ok = r->trials - r->failures;
    if (ok > 1) cell += " ± " + format_spread(r->std_ms);
    if (r->failures > 0) cell += fmt::format("  ({} failed)", r->failures);
    out += fmt::format("{:<16} {:<7} {:>7}  {}\n", display_name(r->device_kind), to_string(r->path), r->trials, cell);
  }
  return out;
}

}  // namespace twinbridge
