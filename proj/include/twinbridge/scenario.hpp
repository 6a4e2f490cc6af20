#pragma once

// Synthetic building: per-device generators producing a deterministic
// stream of readings for a given seed.

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinbridge/clock.hpp"
#include "twinbridge/delay.hpp"
#include "twinbridge/model.hpp"

namespace twinbridge {

/// value(t) = base + amplitude * sin(2*pi*t / period) + N(0, jitter_std)
struct GeneratorSpec {
  double base = 0.0;
  double amplitude = 0.0;
  double period_s = 60.0;
  double jitter_std = 0.0;

  bool operator==(const GeneratorSpec&) const = default;
};

/// Noise-free part of the generator.
double generator_mean(const GeneratorSpec& spec, double t_s);

struct DeviceScenario {
  std::string device_id;
  DeviceKind kind = DeviceKind::Iaq;
  /// Keyed by payload field name ("temperature_c", "fan_rpm", ...).
  std::map<std::string, GeneratorSpec> quantities;
};

struct ScenarioConfig {
  std::vector<DeviceScenario> devices;
  double interval_s = 5.0;
  std::uint64_t seed = 42;

  /// Throws Error(ConfigInvalid) on nonpositive period or interval, missing
  /// quantities or negative jitter.
  void validate() const;

  /// Plausible K/PARK-style conditions for every device in the registry.
  static ScenarioConfig defaults_for(const Registry& registry, std::uint64_t seed = 42);
};

nlohmann::json scenario_config_to_json(const ScenarioConfig& cfg);
/// `registry` supplies kinds and default generators for devices the JSON
/// does not mention.
ScenarioConfig scenario_config_from_json(const nlohmann::json& j, const Registry& registry);

/// Generator for one device; emission k is stamped start_ms + k * interval.
class DeviceGenerator {
 public:
  DeviceGenerator(DeviceScenario scenario, double interval_s, std::uint64_t seed, std::size_t device_index,
                  TimestampMs start_ms);

  SensorReading next();
  std::size_t emitted() const { return index_; }
  const DeviceScenario& scenario() const { return scenario_; }

 private:
  double sample(const std::string& quantity, double t_s);

  DeviceScenario scenario_;
  double interval_s_;
  TimestampMs start_ms_;
  std::size_t index_ = 0;
  std::mt19937_64 rng_;
};

/// All devices stepped in lockstep; emission order is the config order.
class ScenarioGenerator {
 public:
  ScenarioGenerator(const ScenarioConfig& cfg, TimestampMs start_ms);

  std::vector<SensorReading> emit_next();
  std::size_t emissions() const { return emissions_; }

 private:
  std::vector<DeviceGenerator> devices_;
  std::size_t emissions_ = 0;
};

using ReadingSink = std::function<void(const SensorReading&)>;

/// Emits in real time: one thread per device sleeps until each emission
/// instant, then waits the sampled upload delay before handing the reading
/// to the sink.
class ScenarioRunner {
 public:
  ScenarioRunner(ScenarioConfig cfg, ReadingSink sink, DelaySpec upload = DelaySpec::none(),
                 std::shared_ptr<Clock> clock = system_clock());
  ~ScenarioRunner();

  void start();
  void stop();
  std::uint64_t delivered() const { return delivered_.load(); }
  std::uint64_t failures() const { return failures_.load(); }

 private:
  void run_device(std::size_t index, TimestampMs start_ms);

  ScenarioConfig cfg_;
  ReadingSink sink_;
  DelaySpec upload_;
  std::shared_ptr<Clock> clock_;
  std::vector<std::thread> threads_;
  std::atomic<bool> stop_{false};
  std::atomic<std::uint64_t> delivered_{0};
  std::atomic<std::uint64_t> failures_{0};
};

/// Sink that POSTs canonical JSON to a platform's ingest endpoint. Throws on
/// transport failure or rejection.
ReadingSink http_ingest_sink(std::string platform_base_url);

}  // namespace twinbridge
