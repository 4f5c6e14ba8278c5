#include "eyedrive/sim/config.hpp"

#include <charconv>
#include <cmath>
#include <numbers>

#include "eyedrive/errors.hpp"

namespace eyedrive::sim {

const std::vector<SimConfigField>& sim_config_fields() {
  static const std::vector<SimConfigField> fields = {
      {"tick_ms", &SimConfig::tick_ms, 1, 1000, "firmware loop period"},
      {"poll_ms", &SimConfig::poll_ms, 1, 60000, "relay poll period"},
      {"failsafe_ms", &SimConfig::failsafe_ms, 1, 600000, "relay silence before a fail-safe Stop"},
      {"serial_delay_ms", &SimConfig::serial_delay_ms, 0, 10000, "serial transit plus processing"},
      {"link_capacity", &SimConfig::link_capacity, 1, 1024, "frames in flight on the serial link"},
      {"ramp_per_tick", &SimConfig::ramp_per_tick, 1, 255, "speed change per tick"},
      {"threshold_cm", &SimConfig::threshold_cm, 1, 400, "obstacle stop distance"},
      {"guard", &SimConfig::guard, 0, 1, "obstacle guard enabled"},
      {"v_max", &SimConfig::v_max, 0.01, 10, "forward speed at 255, m/s"},
      {"turn_rate_deg", &SimConfig::turn_rate_deg, 1, 720, "turn rate at 255, deg/s"},
      {"max_range_m", &SimConfig::max_range_m, 0.02, 6.5, "ultrasonic range"},
      {"beam_half_angle_deg", &SimConfig::beam_half_angle_deg, 0, 90, "ultrasonic beam half-width"},
      {"frame_period_ms", &SimConfig::frame_period_ms, 1, 10000, "classifier frame period"},
      {"debounce_frames", &SimConfig::debounce_frames, 1, 10000, "debounce run length"},
      {"telemetry_ms", &SimConfig::telemetry_ms, 1, 60000, "telemetry publish period"},
  };
  return fields;
}

namespace {

const SimConfigField& find_field(std::string_view name) {
  for (const auto& f : sim_config_fields()) {
    if (f.name == name) return f;
  }
  throw ConfigError("unknown sim parameter '" + std::string(name) + "'");
}

double value_of(const SimConfig& c, const SimConfigField& f) {
  return std::visit([&](auto m) { return static_cast<double>(c.*m); }, f.member);
}

std::string range_text(const SimConfigField& f) {
  nlohmann::json lo = f.min;
  nlohmann::json hi = f.max;
  return "[" + lo.dump() + ", " + hi.dump() + "]";
}

}  // namespace

void SimConfig::validate() const {
  for (const auto& f : sim_config_fields()) {
    const double v = value_of(*this, f);
    if (!(v >= f.min && v <= f.max)) {
      throw ConfigError(std::string(f.name) + " must be in " + range_text(f));
    }
  }
  const double period_us = frame_period_ms * 1000.0;
  if (period_us != std::floor(period_us)) {
    throw ConfigError("frame_period_ms must be a whole number of microseconds");
  }
}

DriveParams SimConfig::drive() const {
  DriveParams p;
  p.v_max = v_max;
  p.turn_rate = turn_rate_deg * std::numbers::pi / 180.0;
  p.ramp_per_tick = static_cast<std::uint8_t>(ramp_per_tick);
  p.threshold_cm = threshold_cm;
  return p;
}

SensorConfig SimConfig::sensor() const {
  SensorConfig s;
  s.max_range_m = max_range_m;
  s.beam_half_angle = beam_half_angle_deg * std::numbers::pi / 180.0;
  return s;
}

std::int64_t SimConfig::frame_period_us() const { return std::llround(frame_period_ms * 1000.0); }

nlohmann::json to_json(const SimConfig& c) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& f : sim_config_fields()) {
    std::visit([&](auto m) { j[std::string(f.name)] = c.*m; }, f.member);
  }
  return j;
}

void apply_json(SimConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("sim parameters must be an object");
  for (const auto& [key, value] : j.items()) {
    const auto& f = find_field(key);
    std::visit(
        [&](auto m) {
          using T = std::remove_reference_t<decltype(c.*m)>;
          if constexpr (std::is_same_v<T, bool>) {
            if (!value.is_boolean()) throw ConfigError(key + " must be true or false");
          } else if constexpr (std::is_same_v<T, int>) {
            if (!value.is_number_integer()) throw ConfigError(key + " must be an integer");
          } else {
            if (!value.is_number()) throw ConfigError(key + " must be a number");
          }
          c.*m = value.get<T>();
        },
        f.member);
  }
}

void set_field(SimConfig& c, std::string_view name, std::string_view text) {
  const auto& f = find_field(name);
  const std::string key(name);
  std::visit(
      [&](auto m) {
        using T = std::remove_reference_t<decltype(c.*m)>;
        if constexpr (std::is_same_v<T, bool>) {
          if (text == "true") {
            c.*m = true;
          } else if (text == "false") {
            c.*m = false;
          } else {
            throw ConfigError(key + " must be true or false");
          }
        } else {
          T v{};
          const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
          if (ec != std::errc() || ptr != text.data() + text.size()) {
            throw ConfigError(key + (std::is_same_v<T, int> ? " must be an integer" : " must be a number"));
          }
          c.*m = v;
        }
      },
      f.member);
}

}  // namespace eyedrive::sim
