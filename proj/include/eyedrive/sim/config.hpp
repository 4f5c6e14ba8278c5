#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "eyedrive/sim/bot.hpp"
#include "eyedrive/sim/ultrasonic.hpp"
#include "json.hpp"

namespace eyedrive::sim {

/// Firmware, link, world-physics and control-chain timing parameters.
struct SimConfig {
  int tick_ms = 20;
  int poll_ms = 200;
  int failsafe_ms = 1000;
  int serial_delay_ms = 50;
  int link_capacity = 8;
  int ramp_per_tick = 15;
  double threshold_cm = 30.0;
  bool guard = true;
  double v_max = 1.0;             // m/s
  double turn_rate_deg = 90.0;    // deg/s
  double max_range_m = 4.0;
  double beam_half_angle_deg = 90.0;
  double frame_period_ms = 62.5;  // classifier frame period
  int debounce_frames = 30;
  int telemetry_ms = 100;

  /// Throws ConfigError naming the first parameter outside its range.
  void validate() const;

  DriveParams drive() const;
  SensorConfig sensor() const;
  std::int64_t frame_period_us() const;
};

/// One named SimConfig parameter with its accepted range.
struct SimConfigField {
  std::string_view name;
  std::variant<int SimConfig::*, double SimConfig::*, bool SimConfig::*> member;
  double min = 0.0;
  double max = 0.0;
  std::string_view doc;
};

const std::vector<SimConfigField>& sim_config_fields();

nlohmann::json to_json(const SimConfig& c);
/// Applies every key of `j`; throws ConfigError for unknown keys or bad types.
void apply_json(SimConfig& c, const nlohmann::json& j);
/// Sets one parameter from text ("true"/"false" for flags). Throws ConfigError.
void set_field(SimConfig& c, std::string_view name, std::string_view text);

}  // namespace eyedrive::sim
