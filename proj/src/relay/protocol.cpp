#include "eyedrive/relay/protocol.hpp"

#include <charconv>

namespace eyedrive::relay {

namespace {

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

// Splits off the text before the first space; `rest` is what follows that space.
std::string_view take_token(std::string_view& rest, bool& had_space) {
  const std::size_t sp = rest.find(' ');
  had_space = sp != std::string_view::npos;
  const std::string_view tok = rest.substr(0, sp);
  rest = had_space ? rest.substr(sp + 1) : std::string_view{};
  return tok;
}

bool parse_seq(std::string_view text, std::uint64_t& out) {
  if (text.empty() || (text.size() > 1 && text.front() == '0')) return false;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

}  // namespace

std::variant<Request, ProtocolError> parse_request(std::string_view line) {
  line = strip_cr(line);
  if (line.size() > kMaxLineBytes) return ProtocolError{"line too long"};
  if (line.find_first_of("\r\n") != std::string_view::npos) return ProtocolError{"embedded line break"};
  std::string_view rest = line;
  bool more = false;
  const std::string_view verb = take_token(rest, more);
  Request req;
  if (verb == "SET") {
    req.verb = Verb::kSet;
  } else if (verb == "GET") {
    req.verb = Verb::kGet;
  } else if (verb == "SUB") {
    req.verb = Verb::kSub;
  } else {
    return ProtocolError{"unknown verb"};
  }
  if (!more) return ProtocolError{"missing key"};
  bool has_value = false;
  const std::string_view key = take_token(rest, has_value);
  if (key.empty()) return ProtocolError{"missing key"};
  if (req.verb == Verb::kSub) {
    if (!valid_pattern(key)) return ProtocolError{"invalid pattern"};
  } else if (!valid_key(key)) {
    return ProtocolError{"invalid key"};
  }
  req.key = key;
  if (req.verb == Verb::kSet) {
    if (!has_value) return ProtocolError{"missing value"};
    if (rest.size() > kMaxValueBytes) return ProtocolError{"value too long"};
    req.value = rest;
  } else if (has_value) {
    return ProtocolError{"unexpected trailing data"};
  }
  return req;
}

std::string format_request(const Request& r) {
  switch (r.verb) {
    case Verb::kSet: return "SET " + r.key + " " + r.value;
    case Verb::kGet: return "GET " + r.key;
    case Verb::kSub: return "SUB " + r.key;
  }
  return {};
}

std::string format_reply(const Reply& r) {
  switch (r.kind) {
    case ReplyKind::kOk: return "OK " + std::to_string(r.seq);
    case ReplyKind::kValue: return "VALUE " + r.key + " " + std::to_string(r.seq) + " " + r.value;
    case ReplyKind::kAbsent: return "ABSENT " + r.key;
    case ReplyKind::kEvent: return "EVENT " + r.key + " " + std::to_string(r.seq) + " " + r.value;
    case ReplyKind::kErr: return "ERR " + r.value;
  }
  return {};
}

std::variant<Reply, ProtocolError> parse_reply(std::string_view line) {
  line = strip_cr(line);
  std::string_view rest = line;
  bool more = false;
  const std::string_view verb = take_token(rest, more);
  Reply r;
  if (verb == "ERR") {
    r.kind = ReplyKind::kErr;
    r.value = rest;
    return r;
  }
  if (!more) return ProtocolError{"truncated reply"};
  if (verb == "OK") {
    r.kind = ReplyKind::kOk;
    if (!parse_seq(rest, r.seq)) return ProtocolError{"bad seq"};
    return r;
  }
  if (verb == "ABSENT") {
    r.kind = ReplyKind::kAbsent;
    if (!valid_key(rest)) return ProtocolError{"bad key"};
    r.key = rest;
    return r;
  }
  if (verb == "VALUE" || verb == "EVENT") {
    r.kind = verb == "VALUE" ? ReplyKind::kValue : ReplyKind::kEvent;
    bool has_seq = false;
    bool has_value = false;
    r.key = take_token(rest, has_seq);
    if (!has_seq || !valid_key(r.key)) return ProtocolError{"bad key"};
    const std::string_view seq = take_token(rest, has_value);
    if (!has_value || !parse_seq(seq, r.seq)) return ProtocolError{"bad seq"};
    r.value = rest;
    return r;
  }
  return ProtocolError{"unknown reply"};
}

}  // namespace eyedrive::relay
