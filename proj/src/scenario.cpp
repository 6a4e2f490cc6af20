#include "twinbridge/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "twinbridge/codec.hpp"
#include "twinbridge/http_service.hpp"

namespace twinbridge {
namespace {

std::vector<std::string> required_quantities(DeviceKind kind) {
  switch (kind) {
    case DeviceKind::Iaq:
      return {field::kTemperatureC, field::kPm25, field::kCo2};
    case DeviceKind::Fan:
      return {field::kFanRpm};
    case DeviceKind::Weather:
      return {field::kWindMps, field::kHumidityPct};
  }
  return {};
}

std::map<std::string, GeneratorSpec> default_quantities(DeviceKind kind, std::size_t ordinal) {
  const double offset = static_cast<double>(ordinal);
  switch (kind) {
    case DeviceKind::Iaq:
      return {{field::kTemperatureC, {29.0 + 0.25 * offset, 2.0, 600.0, 0.2}},
              {field::kPm25, {12.0, 3.0, 900.0, 0.5}},
              {field::kCo2, {650.0, 60.0, 1200.0, 5.0}}};
    case DeviceKind::Fan:
      return {{field::kFanRpm, {120.0 + 10.0 * offset, 30.0, 300.0, 2.0}}};
    case DeviceKind::Weather:
      return {{field::kWindMps, {3.4, 2.0, 300.0, 0.3}}, {field::kHumidityPct, {78.0, 6.0, 1800.0, 1.0}}};
  }
  return {};
}

double clamp_quantity(const std::string& q, double v) {
  if (q == field::kTemperatureC) return std::clamp(v, -40.0, 80.0);
  if (q == field::kHumidityPct) return std::clamp(v, 0.0, 100.0);
  return std::max(v, 0.0);
}

GeneratorSpec spec_from_json(const nlohmann::json& j) {
  GeneratorSpec s;
  s.base = j.value("base", 0.0);
  s.amplitude = j.value("amplitude", 0.0);
  s.period_s = j.value("period_s", 60.0);
  s.jitter_std = j.value("jitter_std", 0.0);
  return s;
}

}  // namespace

double generator_mean(const GeneratorSpec& spec, double t_s) {
  return spec.base + spec.amplitude * std::sin(2.0 * std::numbers::pi * t_s / spec.period_s);
}

void ScenarioConfig::validate() const {
  if (!(interval_s > 0.0)) throw Error(ErrorCode::ConfigInvalid, "interval_s must be > 0");
  for (const auto& d : devices) {
    for (const auto& q : required_quantities(d.kind)) {
      auto it = d.quantities.find(q);
      if (it == d.quantities.end())
        throw Error(ErrorCode::ConfigInvalid, fmt::format("{}: missing generator for {}", d.device_id, q));
      if (!(it->second.period_s > 0.0))
        throw Error(ErrorCode::ConfigInvalid, fmt::format("{}.{}: period_s must be > 0", d.device_id, q));
      if (!(it->second.jitter_std >= 0.0))
        throw Error(ErrorCode::ConfigInvalid, fmt::format("{}.{}: jitter_std must be >= 0", d.device_id, q));
    }
  }
}

ScenarioConfig ScenarioConfig::defaults_for(const Registry& registry, std::uint64_t seed) {
  ScenarioConfig cfg;
  cfg.seed = seed;
  std::map<DeviceKind, std::size_t> ordinals;
  for (const auto& d : registry.devices()) {
    cfg.devices.push_back({d.device_id, d.kind, default_quantities(d.kind, ordinals[d.kind]++)});
  }
  return cfg;
}

nlohmann::json scenario_config_to_json(const ScenarioConfig& cfg) {
  nlohmann::json devices = nlohmann::json::object();
  for (const auto& d : cfg.devices) {
    nlohmann::json q = nlohmann::json::object();
    for (const auto& [name, s] : d.quantities) {
      q[name] = {{"base", s.base}, {"amplitude", s.amplitude}, {"period_s", s.period_s}, {"jitter_std", s.jitter_std}};
    }
    devices[d.device_id] = std::move(q);
  }
  return {{"interval_s", cfg.interval_s}, {"seed", cfg.seed}, {"devices", std::move(devices)}};
}

ScenarioConfig scenario_config_from_json(const nlohmann::json& j, const Registry& registry) {
  if (j.is_null()) return ScenarioConfig::defaults_for(registry);
  if (!j.is_object()) throw Error(ErrorCode::ConfigInvalid, "scenario must be an object");
  ScenarioConfig cfg;
  try {
    cfg = ScenarioConfig::defaults_for(registry, j.value("seed", std::uint64_t{42}));
    cfg.interval_s = j.value("interval_s", cfg.interval_s);
    if (auto it = j.find("devices"); it != j.end()) {
      for (const auto& [id, quantities] : it->items()) {
        auto dev = std::find_if(cfg.devices.begin(), cfg.devices.end(),
                                [&id = id](const DeviceScenario& d) { return d.device_id == id; });
        if (dev == cfg.devices.end()) throw Error(ErrorCode::ConfigInvalid, "scenario for unknown device " + id);
        for (const auto& [name, spec] : quantities.items()) dev->quantities[name] = spec_from_json(spec);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, e.what());
  }
  cfg.validate();
  return cfg;
}

DeviceGenerator::DeviceGenerator(DeviceScenario scenario, double interval_s, std::uint64_t seed,
                                 std::size_t device_index, TimestampMs start_ms)
    : scenario_(std::move(scenario)), interval_s_(interval_s), start_ms_(start_ms) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(device_index)};
  rng_.seed(seq);
}

double DeviceGenerator::sample(const std::string& quantity, double t_s) {
  const GeneratorSpec& spec = scenario_.quantities.at(quantity);
  // One normal draw per quantity per emission, even with zero jitter, so the
  // stream stays aligned when jitter settings change.
  std::normal_distribution<double> noise(0.0, 1.0);
  double z = noise(rng_);
  return quantize(clamp_quantity(quantity, generator_mean(spec, t_s) + spec.jitter_std * z));
}

SensorReading DeviceGenerator::next() {
  const double t_s = static_cast<double>(index_) * interval_s_;
  SensorReading r;
  r.device_id = scenario_.device_id;
  r.timestamp_ms = start_ms_ + static_cast<TimestampMs>(std::llround(t_s * 1000.0));
  switch (scenario_.kind) {
    case DeviceKind::Iaq: {
      IaqPayload p;
      p.co2_ppm = sample(field::kCo2, t_s);
      p.pm25_ugm3 = sample(field::kPm25, t_s);
      p.temperature_c = sample(field::kTemperatureC, t_s);
      r.payload = p;
      break;
    }
    case DeviceKind::Fan:
      r.payload = FanPayload{sample(field::kFanRpm, t_s)};
      break;
    case DeviceKind::Weather: {
      WeatherPayload p;
      p.humidity_pct = sample(field::kHumidityPct, t_s);
      p.wind_mps = sample(field::kWindMps, t_s);
      r.payload = p;
      break;
    }
  }
  ++index_;
  return r;
}

ScenarioGenerator::ScenarioGenerator(const ScenarioConfig& cfg, TimestampMs start_ms) {
  cfg.validate();
  for (std::size_t i = 0; i < cfg.devices.size(); ++i) {
    devices_.emplace_back(cfg.devices[i], cfg.interval_s, cfg.seed, i, start_ms);
  }
}

std::vector<SensorReading> ScenarioGenerator::emit_next() {
  std::vector<SensorReading> out;
  out.reserve(devices_.size());
  for (auto& d : devices_) out.push_back(d.next());
  ++emissions_;
  return out;
}

ScenarioRunner::ScenarioRunner(ScenarioConfig cfg, ReadingSink sink, DelaySpec upload, std::shared_ptr<Clock> clock)
    : cfg_(std::move(cfg)), sink_(std::move(sink)), upload_(upload), clock_(std::move(clock)) {
  cfg_.validate();
}

ScenarioRunner::~ScenarioRunner() { stop(); }

void ScenarioRunner::start() {
  if (!threads_.empty()) return;
  stop_ = false;
  const TimestampMs start_ms = clock_->now_ms();
  for (std::size_t i = 0; i < cfg_.devices.size(); ++i) {
    threads_.emplace_back([this, i, start_ms] { run_device(i, start_ms); });
  }
}

void ScenarioRunner::stop() {
  stop_ = true;
  for (auto& t : threads_) {
    if (t.joinable()) t.join();
  }
  threads_.clear();
}

void ScenarioRunner::run_device(std::size_t index, TimestampMs start_ms) {
  DeviceGenerator gen(cfg_.devices[index], cfg_.interval_s, cfg_.seed, index, start_ms);
  DelaySampler upload(upload_, seed_for(cfg_.seed, Hop::Upload) + index);
  auto sleep_until_ms = [this](TimestampMs target) {
    while (!stop_) {
      TimestampMs now = clock_->now_ms();
      if (now >= target) return;
      std::this_thread::sleep_for(std::chrono::milliseconds(std::min<TimestampMs>(target - now, 50)));
    }
  };
  while (!stop_) {
    SensorReading reading = gen.next();
    sleep_until_ms(reading.timestamp_ms);
    if (stop_) break;
    double delay = upload.sample_ms();
    sleep_until_ms(clock_->now_ms() + static_cast<TimestampMs>(delay));
    if (stop_) break;
    try {
      sink_(reading);
      ++delivered_;
    } catch (const std::exception& e) {
      ++failures_;
      spdlog::debug("scenario upload for {} failed: {}", reading.device_id, e.what());
    }
  }
}

ReadingSink http_ingest_sink(std::string platform_base_url) {
  return [url = std::move(platform_base_url)](const SensorReading& reading) {
    auto res = http_post_json(url, "/api/v1/ingest", reading_to_json(reading), std::chrono::seconds(10));
    if (!res) throw Error(ErrorCode::Unreachable, url);
    if (res->status != 200) {
      throw Error(reason_of(res->body).value_or(ErrorCode::OriginError), res->body.dump());
    }
  };
}

}  // namespace twinbridge
