#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace eyedrive::gaze {

/// Integer encoding is alphabetical and stable; it fixes the confusion-matrix layout.
enum class GazeClass : std::uint8_t { kDown = 0, kLeft = 1, kRight = 2, kStraight = 3, kUp = 4 };

inline constexpr std::size_t kNumClasses = 5;

inline constexpr std::array<GazeClass, kNumClasses> kAllClasses = {
    GazeClass::kDown, GazeClass::kLeft, GazeClass::kRight, GazeClass::kStraight, GazeClass::kUp};

constexpr std::size_t index_of(GazeClass c) { return static_cast<std::size_t>(c); }
constexpr GazeClass class_at(std::size_t i) { return kAllClasses.at(i); }

constexpr std::string_view name_of(GazeClass c) {
  switch (c) {
    case GazeClass::kDown: return "Down";
    case GazeClass::kLeft: return "Left";
    case GazeClass::kRight: return "Right";
    case GazeClass::kStraight: return "Straight";
    case GazeClass::kUp: return "Up";
  }
  return "?";
}

inline std::optional<GazeClass> parse_gaze_class(std::string_view name) {
  for (GazeClass c : kAllClasses) {
    if (name_of(c) == name) return c;
  }
  return std::nullopt;
}

/// Images per class in the original eye dataset, indexed by GazeClass.
inline constexpr std::array<std::size_t, kNumClasses> kReferenceClassCounts = {
    2045,  // Down
    2858,  // Left
    2797,  // Right
    3058,  // Straight
    2475,  // Up
};

}  // namespace eyedrive::gaze
