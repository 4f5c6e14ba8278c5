#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "eyedrive/command.hpp"
#include "eyedrive/relay/store.hpp"

namespace eyedrive::relay {

inline constexpr std::uint8_t kDefaultSpeed = 128;

/// Reads the current value of a key, or nullopt when it was never written.
using KeyReader = std::function<std::optional<std::string>(std::string_view key)>;

struct Selection {
  Command command = Command::kStop;
  std::uint8_t speed = 0;
  /// Set when the store held something unusable and the fail-safe was taken.
  std::optional<std::string> diagnostic;

  friend bool operator==(const Selection&, const Selection&) = default;
};

/// Signed decimal integer clamped to 0..255; nullopt for anything else
/// (empty, spaces, non-digits).
std::optional<std::uint8_t> parse_speed(std::string_view text);

/// Override "1" selects ManualSignal, "0" or absent selects Signals. Speed is
/// 128 when absent and clamped when out of range. An unset command key yields
/// (Stop, 0) quietly; any unparseable Override, command or Speed yields
/// (Stop, 0) with a diagnostic.
/// Stop always carries speed 0.
Selection select_command(const KeyReader& read);
Selection select_command(const Store& store);

}  // namespace eyedrive::relay
