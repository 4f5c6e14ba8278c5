#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "eyedrive/gaze/gaze_class.hpp"
#include "eyedrive/sim/bot.hpp"
#include "eyedrive/sim/config.hpp"
#include "eyedrive/sim/world.hpp"

namespace eyedrive::sim {

struct GazeRun {
  gaze::GazeClass cls = gaze::GazeClass::kStraight;
  std::size_t frames = 0;
};

struct ScriptedWrite {
  std::int64_t t_ms = 0;
  std::string key;
  std::string value;
};

/// Relay unreachable for t in [from_ms, to_ms).
struct Outage {
  std::int64_t from_ms = 0;
  std::int64_t to_ms = 0;
};

struct Scenario {
  std::optional<std::int64_t> duration_ms;
  World world;
  BotState start;
  std::int64_t gaze_start_ms = 0;
  std::vector<GazeRun> gaze;
  std::vector<ScriptedWrite> relay;
  std::vector<Outage> outages;
  /// Parameter overrides in file order, as (name, text) pairs.
  std::vector<std::pair<std::string, std::string>> config;

  std::size_t gaze_frames() const;
  /// Explicit duration, else 3 s past the last scripted input.
  std::int64_t end_ms(const SimConfig& config) const;
  /// Throws ConfigError when the world or timeline is inconsistent.
  void validate() const;
  /// Applies the scenario's overrides on top of `base`.
  SimConfig configure(SimConfig base) const;
};

/// Parses the YAML scenario format. Errors are ConfigError("scenario line N: ...").
Scenario parse_scenario(std::string_view text);
Scenario load_scenario(const std::filesystem::path& path);

}  // namespace eyedrive::sim
