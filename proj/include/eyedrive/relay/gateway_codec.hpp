#pragma once

#include <string>
#include <string_view>
#include <variant>

#include "eyedrive/relay/protocol.hpp"

namespace eyedrive::relay {

/// Gateway messages are JSON objects with the fields op, key, value and seq,
/// one per protocol line. Requests use op SET, GET or SUB; replies use OK,
/// VALUE, ABSENT, EVENT or ERR and always carry all four fields.
std::variant<Request, ProtocolError> parse_gateway_request(std::string_view text);
std::string format_gateway_reply(const Reply& reply);
std::string format_gateway_request(const Request& request);
std::variant<Reply, ProtocolError> parse_gateway_reply(std::string_view text);

}  // namespace eyedrive::relay
