#pragma once

// Latency experiment: sequential retrieval requests per device kind over the
// direct (platform) and relay paths, with summary statistics.

#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinbridge/delay.hpp"
#include "twinbridge/model.hpp"

namespace twinbridge {

class Platform;
class PlatformServer;
class Relay;
class RelayServer;

enum class PathKind { Direct, Relay };

std::string_view to_string(PathKind path);
std::optional<PathKind> parse_path_kind(std::string_view text);

struct SampleStats {
  std::size_t count = 0;
  double mean = 0.0;
  /// Sample standard deviation (n - 1); 0 for a single sample.
  double std = 0.0;
  double min = 0.0;
  double max = 0.0;
};

/// Single-pass (Welford) statistics. Throws Error(TargetUnreachable) on an
/// empty sample set.
SampleStats compute_stats(std::span<const double> samples);

struct LatencyReport {
  DeviceKind device_kind = DeviceKind::Iaq;
  PathKind path = PathKind::Relay;
  std::size_t trials = 0;
  std::size_t failures = 0;
  double mean_ms = 0.0;
  double std_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
  std::vector<double> raw_samples;

  bool operator==(const LatencyReport&) const = default;
};

LatencyReport make_report(DeviceKind kind, PathKind path, std::vector<double> samples, std::size_t failures);

nlohmann::json report_to_json(const LatencyReport& report);
LatencyReport report_from_json(const nlohmann::json& j);
nlohmann::json reports_to_json(const std::vector<LatencyReport>& reports);
/// Accepts a single report object or an array of reports.
std::vector<LatencyReport> reports_from_json(const nlohmann::json& j);

struct BenchTargets {
  std::string platform_url;
  std::string relay_url;
  std::chrono::milliseconds timeout{30000};
};

/// Device ids of a kind, as listed by the platform.
std::vector<std::string> list_devices(const BenchTargets& targets, DeviceKind kind);

/// Issues `n` back-to-back requests, cycling over the kind's devices, and
/// times each round trip. Failed requests are counted, not sampled.
/// Throws Error(TargetUnreachable) when no request succeeds.
LatencyReport run_trials(const BenchTargets& targets, DeviceKind kind, PathKind path, std::size_t n);

struct ConfidenceInterval {
  double low = 0.0;
  double high = 0.0;
};

/// Percentile bootstrap for mean(treatment) - mean(baseline).
ConfidenceInterval bootstrap_mean_difference(std::span<const double> treatment, std::span<const double> baseline,
                                             std::size_t resamples, std::uint64_t seed, double level = 0.95);

struct OverheadReport {
  DeviceKind device_kind = DeviceKind::Iaq;
  LatencyReport direct;
  LatencyReport relay;
  double overhead_ms = 0.0;
  ConfidenceInterval ci;
  std::size_t resamples = 0;
};

nlohmann::json overhead_to_json(const OverheadReport& report);

/// Platform-sim plus a pass-through relay (no cache, no coalescing, no push)
/// on ephemeral loopback ports, with delays injected per `injection`.
class BenchTopology {
 public:
  explicit BenchTopology(const DelayInjection& injection, const Registry& registry = Registry::default_topology());
  ~BenchTopology();

  BenchTargets targets() const;

 private:
  std::shared_ptr<Platform> platform_;
  std::shared_ptr<Relay> relay_;
  std::unique_ptr<PlatformServer> platform_server_;
  std::unique_ptr<RelayServer> relay_server_;
};

/// Runs both paths against fresh BenchTopology instances built from the same
/// injection seed, so both see the same service-time sequence.
OverheadReport compare_paths(DeviceKind kind, std::size_t n, const DelayInjection& injection,
                             std::size_t resamples = 1000);
/// Same, against already running services.
OverheadReport compare_paths(const BenchTargets& targets, DeviceKind kind, std::size_t n, std::uint64_t seed,
                             std::size_t resamples = 1000);

/// Table with one row per report, ordered IAQ, Fan, Weather (relay before
/// direct). Single-sample rows show the mean only.
std::string render_table(const std::vector<LatencyReport>& reports);

}  // namespace twinbridge
