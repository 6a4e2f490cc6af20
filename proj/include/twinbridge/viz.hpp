#pragma once

// Render-agnostic visualization mapping for zone snapshots:
//   temperature -> red tint alpha, fan RPM -> rendered rotation rate,
//   wind speed -> sound-effect category, air quality / wind / humidity ->
//   formatted numeric displays.
//
// Everything here is a pure function of its inputs.

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "twinbridge/model.hpp"

namespace twinbridge {

struct Rgba {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;
  double a = 0.0;

  bool operator==(const Rgba&) const = default;
};

/// Ordered from weakest to strongest wind.
enum class SoundCategory { Calm, Breeze, Windy, Strong };

std::string_view to_string(SoundCategory category);
std::optional<SoundCategory> parse_sound_category(std::string_view text);

struct DisplayPrecision {
  int pm25 = 1;
  int co2 = 0;
  int wind = 1;
  int humidity = 0;

  bool operator==(const DisplayPrecision&) const = default;
};

struct VizConfig {
  double t_min_c = 24.0;
  double t_max_c = 36.0;
  double max_tint_alpha = 0.6;
  double max_render_rpm = 200.0;
  std::array<double, 3> wind_thresholds_mps{2.0, 5.0, 10.0};
  DisplayPrecision display_precision;

  /// Throws Error(ConfigInvalid).
  void validate() const;
  bool operator==(const VizConfig&) const = default;
};

struct VizParameters {
  /// Absent when the zone has no temperature source.
  std::optional<Rgba> tint;
  std::map<std::string, double> fan_rpm_render;
  /// Absent when the zone has no weather station.
  std::optional<SoundCategory> sound_category;
  std::map<std::string, std::string> numeric_displays;
  /// Set when every temperature input was stale and was used anyway.
  bool degraded = false;

  bool operator==(const VizParameters&) const = default;
};

/// red = 1, alpha = max_tint_alpha * clamp((T - t_min) / (t_max - t_min), 0, 1).
Rgba temp_to_tint(double temperature_c, const VizConfig& cfg);

/// Half-open bands [0, th1) calm, [th1, th2) breeze, [th2, th3) windy,
/// [th3, inf) strong.
SoundCategory wind_to_sound(double wind_mps, const VizConfig& cfg);

/// Identity up to max_render_rpm, clamped above.
double fan_to_render(double fan_rpm, const VizConfig& cfg);

/// Labels "pm25", "co2", "wind", "humidity"; quantities without a source are
/// omitted. Multi-sensor zones show the mean of fresh readings; a value
/// computed only from stale readings gets a " (stale)" suffix.
std::map<std::string, std::string> format_displays(const ZoneSnapshot& snapshot, const VizConfig& cfg);

VizParameters compose(const ZoneSnapshot& snapshot, const VizConfig& cfg);

/// Numeric fields within `tolerance`, everything else exact.
bool viz_equivalent(const VizParameters& lhs, const VizParameters& rhs, double tolerance = 1e-9);

nlohmann::json viz_to_json(const VizParameters& viz);
VizParameters viz_from_json(const nlohmann::json& j);
/// Describes the first schema violation, or nullopt when `j` is a valid
/// VizParameters document.
std::optional<std::string> check_viz_schema(const nlohmann::json& j);

nlohmann::json viz_config_to_json(const VizConfig& cfg);
VizConfig viz_config_from_json(const nlohmann::json& j);

}  // namespace twinbridge
