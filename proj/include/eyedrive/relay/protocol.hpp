#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>

#include "eyedrive/relay/record.hpp"

namespace eyedrive::relay {

/// Longest accepted request line, excluding the newline.
inline constexpr std::size_t kMaxLineBytes = 1024;

enum class Verb { kSet, kGet, kSub };

struct Request {
  Verb verb = Verb::kGet;
  std::string key;    // a subscription pattern for kSub
  std::string value;  // kSet only

  friend bool operator==(const Request&, const Request&) = default;
};

struct ProtocolError {
  std::string reason;
};

/// Parses one request line (a trailing CR is ignored):
///   SET <key> <value>   value is everything after the separating space
///   GET <key>
///   SUB <pattern>       pattern is a key or a prefix ending in '*'
std::variant<Request, ProtocolError> parse_request(std::string_view line);
std::string format_request(const Request& request);

enum class ReplyKind { kOk, kValue, kAbsent, kEvent, kErr };

struct Reply {
  ReplyKind kind = ReplyKind::kOk;
  std::string key;
  std::string value;  // the reason for kErr
  std::uint64_t seq = 0;

  static Reply ok(std::uint64_t seq) { return {ReplyKind::kOk, {}, {}, seq}; }
  static Reply value_of(const RelayRecord& r) { return {ReplyKind::kValue, r.key, r.value, r.seq}; }
  static Reply absent(std::string key) { return {ReplyKind::kAbsent, std::move(key), {}, 0}; }
  static Reply event(const RelayRecord& r) { return {ReplyKind::kEvent, r.key, r.value, r.seq}; }
  static Reply error(std::string reason) { return {ReplyKind::kErr, {}, std::move(reason), 0}; }

  friend bool operator==(const Reply&, const Reply&) = default;
};

/// One reply line without the newline:
///   OK <seq> | VALUE <key> <seq> <value> | ABSENT <key> | EVENT <key> <seq> <value> | ERR <reason>
std::string format_reply(const Reply& reply);
std::variant<Reply, ProtocolError> parse_reply(std::string_view line);

}  // namespace eyedrive::relay
