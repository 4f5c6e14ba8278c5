#pragma once

#include <cstddef>
#include <optional>

#include "eyedrive/command.hpp"
#include "eyedrive/gaze/gaze_class.hpp"

namespace eyedrive::control {

inline constexpr std::size_t kDefaultFrames = 30;
inline constexpr std::size_t kBlinkPresetFrames = 20;

/// Down -> Stop, Left -> Left, Right -> Right, Up -> Start, Straight -> Forward.
Command map_class(gaze::GazeClass c);

/// N-consecutive-frames filter over a gaze-class stream. A command is emitted
/// once, on the push that makes a run of identical classes exactly n_frames
/// long, and only if it differs from the last emitted command.
class Debouncer {
 public:
  /// Throws ConfigError if n_frames is 0.
  explicit Debouncer(std::size_t n_frames = kDefaultFrames);

  std::optional<Command> push(gaze::GazeClass c);

  void reset();

  std::size_t n_frames() const { return n_frames_; }
  std::optional<gaze::GazeClass> candidate() const { return candidate_; }
  std::size_t count() const { return count_; }
  std::optional<Command> last_emitted() const { return last_emitted_; }

 private:
  std::size_t n_frames_;
  std::optional<gaze::GazeClass> candidate_;
  std::size_t count_ = 0;
  std::optional<Command> last_emitted_;
};

}  // namespace eyedrive::control
