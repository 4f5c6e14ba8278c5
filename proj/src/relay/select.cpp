#include "eyedrive/relay/select.hpp"

#include <algorithm>

namespace eyedrive::relay {

std::optional<std::uint8_t> parse_speed(std::string_view text) {
  bool negative = false;
  if (!text.empty() && (text.front() == '-' || text.front() == '+')) {
    negative = text.front() == '-';
    text.remove_prefix(1);
  }
  if (text.empty()) return std::nullopt;
  unsigned value = 0;
  for (const char ch : text) {
    if (ch < '0' || ch > '9') return std::nullopt;
    value = std::min(value * 10 + static_cast<unsigned>(ch - '0'), 256u);
  }
  if (negative) return std::uint8_t{0};
  return static_cast<std::uint8_t>(std::min(value, 255u));
}

namespace {

Selection fail_safe(std::string why) { return {Command::kStop, 0, std::move(why)}; }

std::string quoted(std::string_view key, const std::string& value) {
  return std::string(key) + "=\"" + value + "\"";
}

}  // namespace

Selection select_command(const KeyReader& read) {
  std::string_view source = keys::kSignals;
  if (const auto flag = read(keys::kOverride)) {
    if (*flag == "1") {
      source = keys::kManualSignal;
    } else if (*flag != "0") {
      return fail_safe("unparseable " + quoted(keys::kOverride, *flag));
    }
  }

  const auto text = read(source);
  if (!text) return {Command::kStop, 0, std::nullopt};
  const auto cmd = parse_command(*text);
  if (!cmd) return fail_safe("unparseable " + quoted(source, *text));

  std::uint8_t speed = kDefaultSpeed;
  if (const auto raw = read(keys::kSpeed)) {
    const auto parsed = parse_speed(*raw);
    if (!parsed) return fail_safe("unparseable " + quoted(keys::kSpeed, *raw));
    speed = *parsed;
  }
  if (*cmd == Command::kStop) speed = 0;
  return {*cmd, speed, std::nullopt};
}

Selection select_command(const Store& store) {
  return select_command([&store](std::string_view key) -> std::optional<std::string> {
    if (auto rec = store.get(key)) return std::move(rec->value);
    return std::nullopt;
  });
}

}  // namespace eyedrive::relay
