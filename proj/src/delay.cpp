#include "twinbridge/delay.hpp"

#include <chrono>
#include <thread>

namespace twinbridge {

DelaySampler::DelaySampler(DelaySpec spec, std::uint64_t seed) : spec_(spec), rng_(seed) {}

double DelaySampler::sample_ms() {
  if (spec_.distribution == DelaySpec::Distribution::Constant || spec_.std_ms <= 0.0) {
    return spec_.mean_ms > 0.0 ? spec_.mean_ms : 0.0;
  }
  std::lock_guard lock(mu_);
  std::normal_distribution<double> dist(spec_.mean_ms, spec_.std_ms);
  // Rejection keeps the shape of the distribution above the floor. Give up
  // after a bounded number of draws for pathological means far below zero.
  for (int i = 0; i < 1000; ++i) {
    double v = dist(rng_);
    if (v >= 0.0) return v;
  }
  return 0.0;
}

double DelaySampler::apply() {
  double ms = sample_ms();
  if (ms > 0.0) {
    std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
  }
  return ms;
}

std::uint64_t seed_for(std::uint64_t seed, Hop hop) {
  // splitmix64 finalizer over (seed, hop)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(hop) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

DelaySpec DelayInjection::service_for(DeviceKind kind) const {
  auto it = service_time.find(kind);
  return it == service_time.end() ? DelaySpec::none() : it->second;
}

bool DelayInjection::preset_exists(std::string_view name) { return name == "none" || name == "paper"; }

DelayInjection DelayInjection::from_preset(std::string_view name, std::uint64_t seed) {
  DelayInjection inj;
  inj.seed = seed;
  inj.preset = std::string(name);
  if (name == "none") return inj;
  if (name != "paper") throw Error(ErrorCode::ConfigInvalid, "unknown delay preset " + std::string(name));
  // Direct-path means for IAQ and fan are the measured values; the spreads
  // and the weather service time are calibrated so that relay-path totals
  // land near 320 / 320 / 1226 ms.
  inj.service_time[DeviceKind::Iaq] = DelaySpec::truncated_normal(212.0, 8.0);
  inj.service_time[DeviceKind::Fan] = DelaySpec::truncated_normal(215.0, 6.0);
  inj.service_time[DeviceKind::Weather] = DelaySpec::truncated_normal(1118.0, 30.0);
  inj.client_to_relay = DelaySpec::constant(100.0);
  inj.relay_to_platform = DelaySpec::none();
  inj.upload = DelaySpec::truncated_normal(306.0, 174.0);
  return inj;
}

nlohmann::json to_json(const DelaySpec& spec) {
  if (spec.distribution == DelaySpec::Distribution::Constant) {
    return {{"distribution", "constant"}, {"mean_ms", spec.mean_ms}};
  }
  return {{"distribution", "truncated_normal"}, {"mean_ms", spec.mean_ms}, {"std_ms", spec.std_ms}};
}

DelaySpec delay_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigInvalid, "delay spec must be an object");
  DelaySpec spec;
  std::string dist = j.value("distribution", "constant");
  if (dist == "constant") {
    spec.distribution = DelaySpec::Distribution::Constant;
  } else if (dist == "truncated_normal") {
    spec.distribution = DelaySpec::Distribution::TruncatedNormal;
  } else {
    throw Error(ErrorCode::ConfigInvalid, "unknown delay distribution " + dist);
  }
  spec.mean_ms = j.value("mean_ms", 0.0);
  spec.std_ms = j.value("std_ms", 0.0);
  if (spec.mean_ms < 0.0 || spec.std_ms < 0.0)
    throw Error(ErrorCode::ConfigInvalid, "delay mean/std must be >= 0");
  return spec;
}

nlohmann::json to_json(const DelayInjection& inj) {
  nlohmann::json service = nlohmann::json::object();
  for (const auto& [kind, spec] : inj.service_time) service[std::string(to_string(kind))] = to_json(spec);
  return {{"preset", inj.preset},
          {"seed", inj.seed},
          {"client_to_relay", to_json(inj.client_to_relay)},
          {"relay_to_platform", to_json(inj.relay_to_platform)},
          {"upload", to_json(inj.upload)},
          {"service_time", std::move(service)}};
}

DelayInjection delay_injection_from_json(const nlohmann::json& j) {
  if (j.is_string()) return DelayInjection::from_preset(j.get<std::string>());
  if (!j.is_object()) throw Error(ErrorCode::ConfigInvalid, "injection must be a preset name or object");
  DelayInjection inj = DelayInjection::from_preset(j.value("preset", "none"), j.value("seed", std::uint64_t{42}));
  if (j.contains("client_to_relay")) inj.client_to_relay = delay_spec_from_json(j["client_to_relay"]);
  if (j.contains("relay_to_platform")) inj.relay_to_platform = delay_spec_from_json(j["relay_to_platform"]);
  if (j.contains("upload")) inj.upload = delay_spec_from_json(j["upload"]);
  if (auto it = j.find("service_time"); it != j.end()) {
    for (const auto& [name, spec] : it->items()) {
      auto kind = parse_device_kind(name);
      if (!kind) throw Error(ErrorCode::ConfigInvalid, "unknown device kind " + name);
      inj.service_time[*kind] = delay_spec_from_json(spec);
    }
  }
  return inj;
}

}  // namespace twinbridge
