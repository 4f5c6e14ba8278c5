#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <string_view>
#include <variant>
#include <vector>

#include "eyedrive/command.hpp"

namespace eyedrive::sim {

inline constexpr std::uint8_t kFrameHeader = 0xAA;

/// header, command byte, speed, XOR of the first three.
using SerialFrame = std::array<std::uint8_t, 4>;

struct DecodedFrame {
  Command command = Command::kStop;
  std::uint8_t speed = 0;
  friend bool operator==(const DecodedFrame&, const DecodedFrame&) = default;
};

enum class FrameError { kBadHeader, kBadChecksum, kUnknownCommand };

std::string_view name_of(FrameError e);

SerialFrame serial_encode(Command command, std::uint8_t speed);
std::variant<DecodedFrame, FrameError> serial_decode(const SerialFrame& frame);

/// One-way link with a fixed transit delay and a bounded number of frames
/// in flight. Sending into a full link drops the oldest pending frame.
class SerialLink {
 public:
  /// Throws ConfigError if capacity is 0 or delay is negative.
  SerialLink(std::size_t capacity, std::int64_t delay_us);

  void send(const SerialFrame& frame, std::int64_t now_us);
  /// Removes and returns, in send order, every frame that has arrived by `now_us`.
  std::vector<SerialFrame> receive(std::int64_t now_us);

  std::size_t pending() const { return queue_.size(); }
  std::size_t dropped() const { return dropped_; }
  std::size_t sent() const { return sent_; }

 private:
  struct InFlight {
    SerialFrame frame;
    std::int64_t arrival_us;
  };
  std::size_t capacity_;
  std::int64_t delay_us_;
  std::deque<InFlight> queue_;
  std::size_t dropped_ = 0;
  std::size_t sent_ = 0;
};

}  // namespace eyedrive::sim
