#include "eyedrive/sim/ultrasonic.hpp"

#include <cmath>

namespace eyedrive::sim {

std::uint32_t echo_for_distance(double meters) {
  return static_cast<std::uint32_t>(std::floor(2.0 * meters / kSpeedOfSound * 1e6));
}

double distance_cm_for_echo(std::uint32_t echo_us) { return echo_us * kCmPerUs / 2.0; }

std::optional<double> UltrasonicReading::distance_cm() const {
  if (!echo_us) return std::nullopt;
  return distance_cm_for_echo(*echo_us);
}

UltrasonicReading ultrasonic_measure(const World& world, Vec2 position, double heading,
                                     const SensorConfig& config) {
  const auto hit = world.nearest_in_sector(position, heading, config.beam_half_angle, config.max_range_m);
  if (!hit) return {};
  const std::uint32_t echo = echo_for_distance(*hit);
  if (echo >= kEchoTimeoutUs) return {};
  return {echo};
}

PingTiming ping_timing(const UltrasonicReading& reading, std::int64_t trigger_us) {
  PingTiming t;
  t.trigger_start_us = trigger_us;
  t.trigger_end_us = trigger_us + kTriggerPulseUs;
  t.echo_start_us = t.trigger_end_us;
  t.echo_end_us = t.echo_start_us + reading.echo_width_us();
  return t;
}

}  // namespace eyedrive::sim
