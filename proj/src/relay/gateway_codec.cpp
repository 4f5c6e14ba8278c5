#include "eyedrive/relay/gateway_codec.hpp"

#include "json.hpp"

namespace eyedrive::relay {

using nlohmann::json;

namespace {

const char* verb_name(Verb v) {
  switch (v) {
    case Verb::kSet: return "SET";
    case Verb::kGet: return "GET";
    case Verb::kSub: return "SUB";
  }
  return "";
}

const char* reply_name(ReplyKind k) {
  switch (k) {
    case ReplyKind::kOk: return "OK";
    case ReplyKind::kValue: return "VALUE";
    case ReplyKind::kAbsent: return "ABSENT";
    case ReplyKind::kEvent: return "EVENT";
    case ReplyKind::kErr: return "ERR";
  }
  return "";
}

}  // namespace

std::variant<Request, ProtocolError> parse_gateway_request(std::string_view text) {
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return ProtocolError{"malformed json"};
  const auto op = j.find("op");
  const auto key = j.find("key");
  if (op == j.end() || !op->is_string()) return ProtocolError{"missing op"};
  if (key == j.end() || !key->is_string()) return ProtocolError{"missing key"};
  const auto value = j.find("value");
  if (value != j.end() && !value->is_string()) return ProtocolError{"value must be a string"};

  // Reuse the line parser so both front ends share one set of rules.
  const std::string verb = op->get<std::string>();
  if (verb != "SET" && verb != "GET" && verb != "SUB") return ProtocolError{"unknown verb"};
  const std::string k = key->get<std::string>();
  if (k.find(' ') != std::string::npos) return ProtocolError{"invalid key"};
  std::string line = verb + " " + k;
  if (verb == "SET") {
    if (value == j.end()) return ProtocolError{"missing value"};
    line += " " + value->get<std::string>();
  }
  return parse_request(line);
}

std::string format_gateway_reply(const Reply& r) {
  return json{{"op", reply_name(r.kind)}, {"key", r.key}, {"value", r.value}, {"seq", r.seq}}.dump();
}

std::string format_gateway_request(const Request& r) {
  return json{{"op", verb_name(r.verb)}, {"key", r.key}, {"value", r.value}, {"seq", 0}}.dump();
}

std::variant<Reply, ProtocolError> parse_gateway_reply(std::string_view text) {
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return ProtocolError{"malformed json"};
  try {
    const std::string op = j.at("op").get<std::string>();
    Reply r;
    r.key = j.at("key").get<std::string>();
    r.value = j.at("value").get<std::string>();
    r.seq = j.at("seq").get<std::uint64_t>();
    if (op == "OK") {
      r.kind = ReplyKind::kOk;
    } else if (op == "VALUE") {
      r.kind = ReplyKind::kValue;
    } else if (op == "ABSENT") {
      r.kind = ReplyKind::kAbsent;
    } else if (op == "EVENT") {
      r.kind = ReplyKind::kEvent;
    } else if (op == "ERR") {
      r.kind = ReplyKind::kErr;
    } else {
      return ProtocolError{"unknown op"};
    }
    return r;
  } catch (const json::exception&) {
    return ProtocolError{"missing or mistyped field"};
  }
}

}  // namespace eyedrive::relay
