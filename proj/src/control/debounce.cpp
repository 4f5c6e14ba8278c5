#include "eyedrive/control/debounce.hpp"

#include "eyedrive/errors.hpp"

namespace eyedrive::control {

Command map_class(gaze::GazeClass c) {
  switch (c) {
    case gaze::GazeClass::kDown: return Command::kStop;
    case gaze::GazeClass::kLeft: return Command::kLeft;
    case gaze::GazeClass::kRight: return Command::kRight;
    case gaze::GazeClass::kUp: return Command::kStart;
    case gaze::GazeClass::kStraight: return Command::kForward;
  }
  return Command::kStop;
}

Debouncer::Debouncer(std::size_t n_frames) : n_frames_(n_frames) {
  if (n_frames == 0) throw ConfigError("debounce frame count must be at least 1");
}

std::optional<Command> Debouncer::push(gaze::GazeClass c) {
  if (candidate_ == c) {
    ++count_;
  } else {
    candidate_ = c;
    count_ = 1;
  }
  if (count_ != n_frames_) return std::nullopt;
  const Command cmd = map_class(c);
  if (last_emitted_ == cmd) return std::nullopt;
  last_emitted_ = cmd;
  return cmd;
}

void Debouncer::reset() {
  candidate_.reset();
  count_ = 0;
  last_emitted_.reset();
}

}  // namespace eyedrive::control
