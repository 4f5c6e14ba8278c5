#include "eyedrive/sim/serial.hpp"

#include "eyedrive/errors.hpp"

namespace eyedrive::sim {

std::string_view name_of(FrameError e) {
  switch (e) {
    case FrameError::kBadHeader: return "bad header";
    case FrameError::kBadChecksum: return "bad checksum";
    case FrameError::kUnknownCommand: return "unknown command";
  }
  return "?";
}

SerialFrame serial_encode(Command command, std::uint8_t speed) {
  const auto cmd = static_cast<std::uint8_t>(command);
  return {kFrameHeader, cmd, speed, static_cast<std::uint8_t>(kFrameHeader ^ cmd ^ speed)};
}

std::variant<DecodedFrame, FrameError> serial_decode(const SerialFrame& frame) {
  if (frame[0] != kFrameHeader) return FrameError::kBadHeader;
  if ((frame[0] ^ frame[1] ^ frame[2]) != frame[3]) return FrameError::kBadChecksum;
  if (frame[1] < 0x01 || frame[1] > 0x05) return FrameError::kUnknownCommand;
  return DecodedFrame{static_cast<Command>(frame[1]), frame[2]};
}

SerialLink::SerialLink(std::size_t capacity, std::int64_t delay_us)
    : capacity_(capacity), delay_us_(delay_us) {
  if (capacity == 0) throw ConfigError("serial link capacity must be at least 1");
  if (delay_us < 0) throw ConfigError("serial link delay must be non-negative");
}

void SerialLink::send(const SerialFrame& frame, std::int64_t now_us) {
  if (queue_.size() == capacity_) {
    queue_.pop_front();
    ++dropped_;
  }
  queue_.push_back({frame, now_us + delay_us_});
  ++sent_;
}

std::vector<SerialFrame> SerialLink::receive(std::int64_t now_us) {
  std::vector<SerialFrame> out;
  while (!queue_.empty() && queue_.front().arrival_us <= now_us) {
    out.push_back(queue_.front().frame);
    queue_.pop_front();
  }
  return out;
}

}  // namespace eyedrive::sim
