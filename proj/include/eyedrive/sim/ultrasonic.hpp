#pragma once

#include <cstdint>
#include <optional>

#include "eyedrive/sim/world.hpp"

namespace eyedrive::sim {

inline constexpr std::uint32_t kEchoTimeoutUs = 38000;
inline constexpr std::uint32_t kTriggerPulseUs = 10;
inline constexpr double kSpeedOfSound = 343.0;  // m/s
inline constexpr double kCmPerUs = 0.0343;

/// Echo pulse width for a target `meters` away, truncated to whole
/// microseconds the way a pulse counter reads it.
std::uint32_t echo_for_distance(double meters);
double distance_cm_for_echo(std::uint32_t echo_us);

struct UltrasonicReading {
  std::optional<std::uint32_t> echo_us;  // nullopt: no echo before the timeout

  bool timeout() const { return !echo_us.has_value(); }
  /// Width of the echo line's high pulse; kEchoTimeoutUs on timeout.
  std::uint32_t echo_width_us() const { return echo_us.value_or(kEchoTimeoutUs); }
  std::optional<double> distance_cm() const;
  friend bool operator==(const UltrasonicReading&, const UltrasonicReading&) = default;
};

struct SensorConfig {
  double max_range_m = 4.0;
  /// Half-width of the beam around the heading, radians in [0, pi/2]; 0 is a single ray.
  double beam_half_angle = 1.5707963267948966;
};

UltrasonicReading ultrasonic_measure(const World& world, Vec2 position, double heading,
                                     const SensorConfig& config);

/// Virtual-clock timestamps of one ping triggered at `trigger_us`.
struct PingTiming {
  std::int64_t trigger_start_us = 0;
  std::int64_t trigger_end_us = 0;  // trigger_start + 10
  std::int64_t echo_start_us = 0;   // echo line rises when the trigger falls
  std::int64_t echo_end_us = 0;     // echo_start + echo width
};

PingTiming ping_timing(const UltrasonicReading& reading, std::int64_t trigger_us);

}  // namespace eyedrive::sim
