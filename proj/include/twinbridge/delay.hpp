#pragma once

// Artificial per-hop latency used to stand in for WAN links on loopback.

#include <cstdint>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "twinbridge/model.hpp"

namespace twinbridge {

struct DelaySpec {
  enum class Distribution { Constant, TruncatedNormal };

  Distribution distribution = Distribution::Constant;
  double mean_ms = 0.0;
  double std_ms = 0.0;

  static DelaySpec none() { return {}; }
  static DelaySpec constant(double ms) { return {Distribution::Constant, ms, 0.0}; }
  static DelaySpec truncated_normal(double mean, double stddev) {
    return {Distribution::TruncatedNormal, mean, stddev};
  }

  bool is_zero() const { return mean_ms <= 0.0 && std_ms <= 0.0; }
  bool operator==(const DelaySpec&) const = default;
};

/// Thread-safe, seeded sampler for one hop. Samples are never negative;
/// truncated-normal draws below zero are redrawn.
class DelaySampler {
 public:
  DelaySampler(DelaySpec spec, std::uint64_t seed);

  double sample_ms();
  /// Draws a sample and sleeps for it. Returns the slept duration.
  double apply();

  const DelaySpec& spec() const { return spec_; }

 private:
  DelaySpec spec_;
  std::mutex mu_;
  std::mt19937_64 rng_;
};

enum class Hop : std::uint64_t {
  ClientToRelay = 1,
  RelayToPlatform = 2,
  Upload = 3,
  ServiceIaq = 10,
  ServiceFan = 11,
  ServiceWeather = 12,
};

/// Mixes the injection seed with a hop id so every hop has an independent,
/// reproducible stream.
std::uint64_t seed_for(std::uint64_t seed, Hop hop);

struct DelayInjection {
  std::string preset = "none";
  DelaySpec client_to_relay;
  DelaySpec relay_to_platform;
  DelaySpec upload;
  std::map<DeviceKind, DelaySpec> service_time;
  std::uint64_t seed = 42;

  DelaySpec service_for(DeviceKind kind) const;

  /// "none" or "paper". Throws Error(ConfigInvalid) for anything else.
  static DelayInjection from_preset(std::string_view name, std::uint64_t seed = 42);
  static bool preset_exists(std::string_view name);
};

nlohmann::json to_json(const DelaySpec& spec);
DelaySpec delay_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DelayInjection& injection);
/// Accepts {"preset": "...", "seed": N} optionally overriding individual hops.
DelayInjection delay_injection_from_json(const nlohmann::json& j);

}  // namespace twinbridge
