#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace eyedrive {

/// Drive commands. The numeric values are the serial command bytes.
enum class Command : std::uint8_t { kStop = 1, kLeft = 2, kRight = 3, kStart = 4, kForward = 5 };

inline constexpr std::array<Command, 5> kAllCommands = {
    Command::kStop, Command::kLeft, Command::kRight, Command::kStart, Command::kForward};

constexpr std::string_view name_of(Command c) {
  switch (c) {
    case Command::kStop: return "Stop";
    case Command::kLeft: return "Left";
    case Command::kRight: return "Right";
    case Command::kStart: return "Start";
    case Command::kForward: return "Forward";
  }
  return "?";
}

/// Exact, case-sensitive match on the command names above.
inline std::optional<Command> parse_command(std::string_view text) {
  for (Command c : kAllCommands) {
    if (name_of(c) == text) return c;
  }
  return std::nullopt;
}

/// True for commands that can make the bot move.
constexpr bool is_moving(Command c) { return c != Command::kStop; }

}  // namespace eyedrive
