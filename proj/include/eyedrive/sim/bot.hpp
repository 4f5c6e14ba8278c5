#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "eyedrive/command.hpp"
#include "eyedrive/sim/ultrasonic.hpp"
#include "eyedrive/sim/world.hpp"

namespace eyedrive::sim {

enum class Mode { kStopped, kRunning };

std::string_view name_of(Mode m);

struct BotState {
  double x = 0.0;        // m
  double y = 0.0;        // m
  double heading = 0.0;  // rad, counter-clockwise from +x, kept in (-pi, pi]
  std::uint8_t speed = 0;
  std::uint8_t target_speed = 0;
  Mode mode = Mode::kStopped;
  Command active_command = Command::kStop;
  bool obstacle_blocked = false;

  Vec2 position() const { return {x, y}; }
  friend bool operator==(const BotState&, const BotState&) = default;
};

struct DriveParams {
  double v_max = 1.0;                          // m/s at speed 255
  double turn_rate = 1.5707963267948966;       // rad/s at speed 255
  std::uint8_t ramp_per_tick = 15;
  double threshold_cm = 30.0;
};

/// Start arms the bot and drives forward; Stop halts at once; Forward, Left
/// and Right steer a running bot and are ignored while stopped.
BotState apply_command(BotState state, Command command, std::uint8_t speed);

/// Moves `speed` toward `target` by at most `rate`.
std::uint8_t motor_ramp(std::uint8_t speed, std::uint8_t target, std::uint8_t rate);

/// A reading closer than the threshold blocks forward motion (speed drops to
/// 0 without ramping); turning stays allowed. Timeouts and far readings clear the block.
BotState obstacle_guard(BotState state, const UltrasonicReading& reading, double threshold_cm);

/// Integrates one tick of motion. Forward advances along the heading, Left
/// and Right rotate in place. A move that would touch an obstacle or wall
/// stops short of it and forces speed to 0. Throws InputError if dt <= 0.
BotState step(BotState state, const World& world, double dt, const DriveParams& params,
              bool* collided = nullptr);

double wrap_angle(double a);

/// `t_ms x y heading speed mode blocked`, tab separated.
std::string format_trajectory_line(std::int64_t t_ms, const BotState& s);

}  // namespace eyedrive::sim
