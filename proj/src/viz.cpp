#include "twinbridge/viz.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace twinbridge {

std::string_view to_string(SoundCategory category) {
  switch (category) {
    case SoundCategory::Calm:
      return "calm";
    case SoundCategory::Breeze:
      return "breeze";
    case SoundCategory::Windy:
      return "windy";
    case SoundCategory::Strong:
      return "strong";
  }
  return "calm";
}

std::optional<SoundCategory> parse_sound_category(std::string_view text) {
  for (auto c : {SoundCategory::Calm, SoundCategory::Breeze, SoundCategory::Windy, SoundCategory::Strong}) {
    if (to_string(c) == text) return c;
  }
  return std::nullopt;
}

void VizConfig::validate() const {
  if (!(t_min_c < t_max_c)) throw Error(ErrorCode::ConfigInvalid, "t_min_c must be < t_max_c");
  if (!(max_tint_alpha >= 0.0 && max_tint_alpha <= 1.0))
    throw Error(ErrorCode::ConfigInvalid, "max_tint_alpha must be in [0,1]");
  if (!(max_render_rpm >= 0.0)) throw Error(ErrorCode::ConfigInvalid, "max_render_rpm must be >= 0");
  const auto& th = wind_thresholds_mps;
  if (!(th[0] > 0.0 && th[0] < th[1] && th[1] < th[2]))
    throw Error(ErrorCode::ConfigInvalid, "wind thresholds must be positive and strictly ascending");
  for (int p : {display_precision.pm25, display_precision.co2, display_precision.wind, display_precision.humidity}) {
    if (p < 0 || p > 6) throw Error(ErrorCode::ConfigInvalid, "display precision must be in [0,6]");
  }
}

Rgba temp_to_tint(double temperature_c, const VizConfig& cfg) {
  if (std::isnan(temperature_c)) throw Error(ErrorCode::NanInput, "temperature_c");
  double frac = (temperature_c - cfg.t_min_c) / (cfg.t_max_c - cfg.t_min_c);
  frac = std::clamp(frac, 0.0, 1.0);
  return Rgba{1.0, 0.0, 0.0, cfg.max_tint_alpha * frac};
}

SoundCategory wind_to_sound(double wind_mps, const VizConfig& cfg) {
  if (std::isnan(wind_mps)) throw Error(ErrorCode::NanInput, "wind_mps");
  if (wind_mps < 0.0) throw Error(ErrorCode::NegativeWind, "wind_mps");
  const auto& th = cfg.wind_thresholds_mps;
  if (wind_mps < th[0]) return SoundCategory::Calm;
  if (wind_mps < th[1]) return SoundCategory::Breeze;
  if (wind_mps < th[2]) return SoundCategory::Windy;
  return SoundCategory::Strong;
}

double fan_to_render(double fan_rpm, const VizConfig& cfg) {
  if (std::isnan(fan_rpm)) throw Error(ErrorCode::NanInput, "fan_rpm");
  if (fan_rpm < 0.0) throw Error(ErrorCode::NegativeRpm, "fan_rpm");
  return std::min(fan_rpm, cfg.max_render_rpm);
}

namespace {

struct Aggregate {
  double value = 0.0;
  bool stale = false;
};

// Mean over fresh readings of the given kind; falls back to every reading
// (flagged stale) when none is fresh. Iterates in device-id order so the
// summation order, and therefore the result, is deterministic.
template <class Payload, class Extract>
std::optional<Aggregate> aggregate(const ZoneSnapshot& snap, Extract extract) {
  double fresh_sum = 0.0, all_sum = 0.0;
  std::size_t fresh_n = 0, all_n = 0;
  for (const auto& [id, reading] : snap.readings) {
    const auto* p = std::get_if<Payload>(&reading.payload);
    if (p == nullptr) continue;
    double v = extract(*p);
    auto st = snap.stale.find(id);
    bool stale = st != snap.stale.end() && st->second;
    all_sum += v;
    ++all_n;
    if (!stale) {
      fresh_sum += v;
      ++fresh_n;
    }
  }
  if (all_n == 0) return std::nullopt;
  if (fresh_n > 0) return Aggregate{fresh_sum / static_cast<double>(fresh_n), false};
  return Aggregate{all_sum / static_cast<double>(all_n), true};
}

std::string decorate(std::string text, bool stale) {
  if (stale) text += " (stale)";
  return text;
}

}  // namespace

std::map<std::string, std::string> format_displays(const ZoneSnapshot& snap, const VizConfig& cfg) {
  std::map<std::string, std::string> out;
  const auto& prec = cfg.display_precision;
  if (auto pm = aggregate<IaqPayload>(snap, [](const IaqPayload& p) { return p.pm25_ugm3; })) {
    out["pm25"] = decorate(fmt::format("{:.{}f} µg/m³", pm->value, prec.pm25), pm->stale);
  }
  if (auto co2 = aggregate<IaqPayload>(snap, [](const IaqPayload& p) { return p.co2_ppm; })) {
    out["co2"] = decorate(fmt::format("{:.{}f} ppm", co2->value, prec.co2), co2->stale);
  }
  if (auto wind = aggregate<WeatherPayload>(snap, [](const WeatherPayload& p) { return p.wind_mps; })) {
    out["wind"] = decorate(fmt::format("{:.{}f} m/s", wind->value, prec.wind), wind->stale);
  }
  if (auto hum = aggregate<WeatherPayload>(snap, [](const WeatherPayload& p) { return p.humidity_pct; })) {
    out["humidity"] = decorate(fmt::format("{:.{}f} %", hum->value, prec.humidity), hum->stale);
  }
  return out;
}

VizParameters compose(const ZoneSnapshot& snap, const VizConfig& cfg) {
  VizParameters viz;
  if (auto temp = aggregate<IaqPayload>(snap, [](const IaqPayload& p) { return p.temperature_c; })) {
    viz.tint = temp_to_tint(temp->value, cfg);
    viz.degraded = temp->stale;
  }
  for (const auto& [id, reading] : snap.readings) {
    if (const auto* fan = std::get_if<FanPayload>(&reading.payload)) {
      viz.fan_rpm_render[id] = fan_to_render(fan->fan_rpm, cfg);
    }
  }
  if (auto wind = aggregate<WeatherPayload>(snap, [](const WeatherPayload& p) { return p.wind_mps; })) {
    viz.sound_category = wind_to_sound(wind->value, cfg);
  }
  viz.numeric_displays = format_displays(snap, cfg);
  return viz;
}

namespace {

bool close(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

}  // namespace

bool viz_equivalent(const VizParameters& lhs, const VizParameters& rhs, double tol) {
  if (lhs.tint.has_value() != rhs.tint.has_value()) return false;
  if (lhs.tint) {
    const auto &a = *lhs.tint, &b = *rhs.tint;
    if (!close(a.r, b.r, tol) || !close(a.g, b.g, tol) || !close(a.b, b.b, tol) || !close(a.a, b.a, tol))
      return false;
  }
  if (lhs.fan_rpm_render.size() != rhs.fan_rpm_render.size()) return false;
  for (const auto& [id, rpm] : lhs.fan_rpm_render) {
    auto it = rhs.fan_rpm_render.find(id);
    if (it == rhs.fan_rpm_render.end() || !close(rpm, it->second, tol)) return false;
  }
  return lhs.sound_category == rhs.sound_category && lhs.numeric_displays == rhs.numeric_displays &&
         lhs.degraded == rhs.degraded;
}

nlohmann::json viz_to_json(const VizParameters& viz) {
  nlohmann::json j;
  if (viz.tint) {
    j["tint"] = {{"r", viz.tint->r}, {"g", viz.tint->g}, {"b", viz.tint->b}, {"a", viz.tint->a}};
  } else {
    j["tint"] = nullptr;
  }
  j["fan_rpm_render"] = nlohmann::json::object();
  for (const auto& [id, rpm] : viz.fan_rpm_render) j["fan_rpm_render"][id] = rpm;
  if (viz.sound_category) {
    j["sound_category"] = std::string(to_string(*viz.sound_category));
  } else {
    j["sound_category"] = nullptr;
  }
  j["numeric_displays"] = nlohmann::json::object();
  for (const auto& [label, text] : viz.numeric_displays) j["numeric_displays"][label] = text;
  j["degraded"] = viz.degraded;
  return j;
}

std::optional<std::string> check_viz_schema(const nlohmann::json& j) {
  if (!j.is_object()) return "VizParameters must be an object";
  for (const char* key : {"tint", "fan_rpm_render", "sound_category", "numeric_displays"}) {
    if (!j.contains(key)) return fmt::format("missing field {}", key);
  }
  const auto& tint = j["tint"];
  if (!tint.is_null()) {
    if (!tint.is_object()) return "tint must be an object or null";
    for (const char* ch : {"r", "g", "b", "a"}) {
      if (!tint.contains(ch) || !tint[ch].is_number()) return fmt::format("tint.{} must be a number", ch);
      double v = tint[ch].get<double>();
      if (!(v >= 0.0 && v <= 1.0)) return fmt::format("tint.{} outside [0,1]", ch);
    }
  }
  const auto& fans = j["fan_rpm_render"];
  if (!fans.is_object()) return "fan_rpm_render must be an object";
  for (const auto& [id, rpm] : fans.items()) {
    if (!rpm.is_number() || rpm.get<double>() < 0.0) return fmt::format("fan_rpm_render.{} must be >= 0", id);
  }
  const auto& sound = j["sound_category"];
  if (!sound.is_null() && (!sound.is_string() || !parse_sound_category(sound.get<std::string>())))
    return "sound_category must be calm|breeze|windy|strong or null";
  const auto& displays = j["numeric_displays"];
  if (!displays.is_object()) return "numeric_displays must be an object";
  for (const auto& [label, text] : displays.items()) {
    if (!text.is_string()) return fmt::format("numeric_displays.{} must be a string", label);
  }
  if (j.contains("degraded") && !j["degraded"].is_boolean()) return "degraded must be a boolean";
  return std::nullopt;
}

VizParameters viz_from_json(const nlohmann::json& j) {
  if (auto why = check_viz_schema(j)) throw Error(ErrorCode::BadType, *why);
  VizParameters viz;
  if (const auto& t = j["tint"]; !t.is_null()) {
    viz.tint = Rgba{t["r"].get<double>(), t["g"].get<double>(), t["b"].get<double>(), t["a"].get<double>()};
  }
  for (const auto& [id, rpm] : j["fan_rpm_render"].items()) viz.fan_rpm_render[id] = rpm.get<double>();
  if (const auto& s = j["sound_category"]; !s.is_null()) viz.sound_category = parse_sound_category(s.get<std::string>());
  for (const auto& [label, text] : j["numeric_displays"].items()) viz.numeric_displays[label] = text.get<std::string>();
  viz.degraded = j.value("degraded", false);
  return viz;
}

nlohmann::json viz_config_to_json(const VizConfig& cfg) {
  const auto& p = cfg.display_precision;
  return {{"t_min_c", cfg.t_min_c},
          {"t_max_c", cfg.t_max_c},
          {"max_tint_alpha", cfg.max_tint_alpha},
          {"max_render_rpm", cfg.max_render_rpm},
          {"wind_thresholds_mps", cfg.wind_thresholds_mps},
          {"display_precision", {{"pm25", p.pm25}, {"co2", p.co2}, {"wind", p.wind}, {"humidity", p.humidity}}}};
}

VizConfig viz_config_from_json(const nlohmann::json& j) {
  VizConfig cfg;
  if (j.is_null()) return cfg;
  if (!j.is_object()) throw Error(ErrorCode::ConfigInvalid, "viz config must be an object");
  try {
    cfg.t_min_c = j.value("t_min_c", cfg.t_min_c);
    cfg.t_max_c = j.value("t_max_c", cfg.t_max_c);
    cfg.max_tint_alpha = j.value("max_tint_alpha", cfg.max_tint_alpha);
    cfg.max_render_rpm = j.value("max_render_rpm", cfg.max_render_rpm);
    if (j.contains("wind_thresholds_mps")) cfg.wind_thresholds_mps = j["wind_thresholds_mps"].get<std::array<double, 3>>();
    if (auto it = j.find("display_precision"); it != j.end()) {
      auto& p = cfg.display_precision;
      p.pm25 = it->value("pm25", p.pm25);
      p.co2 = it->value("co2", p.co2);
      p.wind = it->value("wind", p.wind);
      p.humidity = it->value("humidity", p.humidity);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, e.what());
  }
  cfg.validate();
  return cfg;
}

}  // namespace twinbridge
