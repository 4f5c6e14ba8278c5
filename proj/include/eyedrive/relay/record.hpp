#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace eyedrive::relay {

struct RelayRecord {
  std::string key;
  std::string value;
  std::uint64_t seq = 0;         // per key, first write is 1
  std::int64_t timestamp_ms = 0;  // store clock at write time

  friend bool operator==(const RelayRecord&, const RelayRecord&) = default;
};

namespace keys {
inline constexpr std::string_view kSignals = "Signals";
inline constexpr std::string_view kSpeed = "Speed";
inline constexpr std::string_view kOverride = "Override";
inline constexpr std::string_view kManualSignal = "ManualSignal";
inline constexpr std::string_view kTelemetryPrefix = "telemetry/";
}  // namespace keys

inline constexpr std::size_t kMaxKeyBytes = 128;
inline constexpr std::size_t kMaxValueBytes = 256;

/// Keys are 1..128 bytes of printable ASCII without spaces or '*'.
bool valid_key(std::string_view key);

/// Values are at most 256 bytes and contain no CR or LF.
bool valid_value(std::string_view value);

/// A subscription pattern is a valid key, or a (possibly empty) key prefix followed by '*'.
bool valid_pattern(std::string_view pattern);
bool pattern_matches(std::string_view pattern, std::string_view key);

}  // namespace eyedrive::relay
