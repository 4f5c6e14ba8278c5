#include "eyedrive/sim/bot.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "eyedrive/errors.hpp"

namespace eyedrive::sim {

namespace {

// Stop a colliding move this far short of the contact point.
constexpr double kContactGap = 1e-6;

}  // namespace

std::string_view name_of(Mode m) { return m == Mode::kRunning ? "Running" : "Stopped"; }

BotState apply_command(BotState s, Command command, std::uint8_t speed) {
  switch (command) {
    case Command::kStop:
      s.mode = Mode::kStopped;
      s.active_command = Command::kStop;
      s.target_speed = 0;
      s.speed = 0;
      break;
    case Command::kStart:
      s.mode = Mode::kRunning;
      s.active_command = Command::kForward;
      s.target_speed = speed;
      break;
    case Command::kForward:
    case Command::kLeft:
    case Command::kRight:
      if (s.mode == Mode::kRunning) {
        s.active_command = command;
        s.target_speed = speed;
      }
      break;
  }
  return s;
}

std::uint8_t motor_ramp(std::uint8_t speed, std::uint8_t target, std::uint8_t rate) {
  if (speed < target) return static_cast<std::uint8_t>(speed + std::min<int>(rate, target - speed));
  if (speed > target) return static_cast<std::uint8_t>(speed - std::min<int>(rate, speed - target));
  return speed;
}

BotState obstacle_guard(BotState s, const UltrasonicReading& reading, double threshold_cm) {
  const auto d = reading.distance_cm();
  s.obstacle_blocked = d && *d < threshold_cm;
  if (s.obstacle_blocked && s.active_command == Command::kForward) s.speed = 0;
  return s;
}

double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

BotState step(BotState s, const World& world, double dt, const DriveParams& p, bool* collided) {
  if (!(dt > 0.0)) throw InputError("step needs a positive time step");
  if (collided) *collided = false;
  if (s.mode != Mode::kRunning || s.speed == 0) return s;
  const double frac = s.speed / 255.0;
  switch (s.active_command) {
    case Command::kForward: {
      const double travel = frac * p.v_max * dt;
      double move = travel;
      if (const auto hit = world.ray_cast(s.position(), s.heading, travel)) {
        move = std::max(0.0, *hit - kContactGap);
        s.speed = 0;
        if (collided) *collided = true;
      }
      s.x += move * std::cos(s.heading);
      s.y += move * std::sin(s.heading);
      break;
    }
    case Command::kLeft: s.heading = wrap_angle(s.heading + frac * p.turn_rate * dt); break;
    case Command::kRight: s.heading = wrap_angle(s.heading - frac * p.turn_rate * dt); break;
    default: break;
  }
  return s;
}

std::string format_trajectory_line(std::int64_t t_ms, const BotState& s) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%lld\t%.4f\t%.4f\t%.4f\t%u\t%s\t%d", static_cast<long long>(t_ms), s.x,
                s.y, s.heading, static_cast<unsigned>(s.speed), name_of(s.mode).data(),
                s.obstacle_blocked ? 1 : 0);
  return buf;
}

}  // namespace eyedrive::sim
