#include "eyedrive/relay/client.hpp"

#include <array>
#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "eyedrive/errors.hpp"
#include "eyedrive/relay/gateway_codec.hpp"

namespace eyedrive::relay {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

// Runs the io_context until `done` or the timeout; on timeout calls `cancel`
// and drains the aborted handler. Returns whether the operation completed.
template <typename Cancel>
bool run_until(asio::io_context& ioc, const bool& done, std::chrono::milliseconds timeout,
               Cancel cancel) {
  ioc.restart();
  ioc.run_for(timeout);
  if (done) return true;
  cancel();
  ioc.restart();
  ioc.run();
  return done;
}

tcp::socket connect_socket(asio::io_context& ioc, const std::string& host, std::uint16_t port,
                           std::chrono::milliseconds timeout) {
  tcp::resolver resolver(ioc);
  boost::system::error_code ec;
  const auto endpoints = resolver.resolve(host, std::to_string(port), ec);
  if (ec) throw IoError("cannot resolve " + host + ": " + ec.message());
  tcp::socket socket(ioc);
  bool done = false;
  boost::system::error_code connect_ec;
  asio::async_connect(socket, endpoints,
                      [&](const boost::system::error_code& e, const tcp::endpoint&) {
                        connect_ec = e;
                        done = true;
                      });
  if (!run_until(ioc, done, timeout, [&] { socket.close(); }) || connect_ec) {
    throw IoError("cannot connect to " + host + ":" + std::to_string(port) +
                  (connect_ec ? ": " + connect_ec.message() : ": timeout"));
  }
  socket.set_option(tcp::no_delay(true));
  return socket;
}

}  // namespace

std::uint64_t Client::set(std::string_view key, std::string_view value) {
  const Reply r = call({Verb::kSet, std::string(key), std::string(value)});
  if (r.kind == ReplyKind::kErr) throw InputError("relay rejected SET: " + r.value);
  if (r.kind != ReplyKind::kOk) throw IoError("protocol desync: unexpected reply to SET");
  return r.seq;
}

std::optional<RelayRecord> Client::get(std::string_view key) {
  const Reply r = call({Verb::kGet, std::string(key), {}});
  switch (r.kind) {
    case ReplyKind::kValue: return RelayRecord{r.key, r.value, r.seq, 0};
    case ReplyKind::kAbsent: return std::nullopt;
    case ReplyKind::kErr: throw InputError("relay rejected GET: " + r.value);
    default: throw IoError("protocol desync: unexpected reply to GET");
  }
}

void Client::subscribe(std::string_view pattern) {
  const Reply r = call({Verb::kSub, std::string(pattern), {}});
  if (r.kind == ReplyKind::kErr) throw InputError("relay rejected SUB: " + r.value);
  if (r.kind != ReplyKind::kOk) throw IoError("protocol desync: unexpected reply to SUB");
}

Reply Client::call(const Request& request) {
  send_message(request);
  while (true) {
    auto reply = receive(timeout_);
    if (!reply) throw IoError("timeout waiting for relay reply");
    if (reply->kind != ReplyKind::kEvent) return *reply;
    events_.push_back(std::move(*reply));
  }
}

std::optional<RelayRecord> Client::next_event(std::chrono::milliseconds timeout) {
  if (events_.empty()) {
    auto reply = receive(timeout);
    if (!reply) return std::nullopt;
    if (reply->kind != ReplyKind::kEvent) throw IoError("protocol desync: reply without request");
    events_.push_back(std::move(*reply));
  }
  Reply e = std::move(events_.front());
  events_.pop_front();
  return RelayRecord{e.key, e.value, e.seq, 0};
}

struct TcpClient::Impl {
  asio::io_context ioc;
  tcp::socket socket;
  std::string buffer;
  std::array<char, 4096> chunk{};

  Impl(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout)
      : socket(connect_socket(ioc, host, port, timeout)) {}
};

TcpClient::TcpClient(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout)
    : Client(timeout), impl_(std::make_unique<Impl>(host, port, timeout)) {}

TcpClient::TcpClient(TcpClient&&) noexcept = default;
TcpClient& TcpClient::operator=(TcpClient&&) noexcept = default;

TcpClient::~TcpClient() {
  if (!impl_) return;
  boost::system::error_code ignored;
  impl_->socket.shutdown(tcp::socket::shutdown_both, ignored);
  impl_->socket.close(ignored);
}

void TcpClient::send_raw(std::string_view line) {
  std::string out(line);
  out += '\n';
  boost::system::error_code ec;
  asio::write(impl_->socket, asio::buffer(out), ec);
  if (ec) throw IoError("relay connection lost: " + ec.message());
}

std::optional<std::string> TcpClient::read_line(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    const std::size_t nl = impl_->buffer.find('\n');
    if (nl != std::string::npos) {
      std::string line = impl_->buffer.substr(0, nl);
      impl_->buffer.erase(0, nl + 1);
      return line;
    }
    const auto left =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) return std::nullopt;
    bool done = false;
    boost::system::error_code ec;
    std::size_t n = 0;
    impl_->socket.async_read_some(asio::buffer(impl_->chunk),
                                  [&](const boost::system::error_code& e, std::size_t got) {
                                    ec = e;
                                    n = got;
                                    done = true;
                                  });
    if (!run_until(impl_->ioc, done, left, [&] { impl_->socket.cancel(); })) return std::nullopt;
    if (ec == asio::error::operation_aborted) return std::nullopt;
    if (ec) throw IoError("relay connection lost: " + ec.message());
    impl_->buffer.append(impl_->chunk.data(), n);
  }
}

void TcpClient::send_message(const Request& request) { send_raw(format_request(request)); }

std::optional<Reply> TcpClient::receive(std::chrono::milliseconds timeout) {
  const auto line = read_line(timeout);
  if (!line) return std::nullopt;
  auto parsed = parse_reply(*line);
  if (const auto* err = std::get_if<ProtocolError>(&parsed)) {
    throw IoError("protocol desync: " + err->reason + " in '" + *line + "'");
  }
  return std::get<Reply>(std::move(parsed));
}

struct GatewayClient::Impl {
  asio::io_context ioc;
  websocket::stream<beast::tcp_stream> ws;
  beast::flat_buffer buffer;

  Impl(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout)
      : ws(connect_socket(ioc, host, port, timeout)) {
    bool done = false;
    boost::system::error_code ec;
    ws.async_handshake(host + ":" + std::to_string(port), "/",
                       [&](const boost::system::error_code& e) {
                         ec = e;
                         done = true;
                       });
    if (!run_until(ioc, done, timeout, [&] { beast::get_lowest_layer(ws).cancel(); }) || ec) {
      throw IoError("websocket handshake failed" + (ec ? ": " + ec.message() : std::string()));
    }
    ws.text(true);
  }
};

GatewayClient::GatewayClient(const std::string& host, std::uint16_t port,
                             std::chrono::milliseconds timeout)
    : Client(timeout), impl_(std::make_unique<Impl>(host, port, timeout)) {}

GatewayClient::GatewayClient(GatewayClient&&) noexcept = default;
GatewayClient& GatewayClient::operator=(GatewayClient&&) noexcept = default;

GatewayClient::~GatewayClient() {
  if (!impl_) return;
  boost::system::error_code ignored;
  beast::get_lowest_layer(impl_->ws).socket().shutdown(tcp::socket::shutdown_both, ignored);
  beast::get_lowest_layer(impl_->ws).socket().close(ignored);
}

void GatewayClient::send_text(std::string_view text) {
  boost::system::error_code ec;
  impl_->ws.write(asio::buffer(text.data(), text.size()), ec);
  if (ec) throw IoError("gateway connection lost: " + ec.message());
}

std::optional<std::string> GatewayClient::read_text(std::chrono::milliseconds timeout) {
  bool done = false;
  boost::system::error_code ec;
  impl_->ws.async_read(impl_->buffer, [&](const boost::system::error_code& e, std::size_t) {
    ec = e;
    done = true;
  });
  // Cancelling a websocket read tears the stream down, so a timed-out client is unusable.
  if (!run_until(impl_->ioc, done, timeout, [&] { beast::get_lowest_layer(impl_->ws).cancel(); })) {
    return std::nullopt;
  }
  if (ec == asio::error::operation_aborted) return std::nullopt;
  if (ec) throw IoError("gateway connection lost: " + ec.message());
  std::string text = beast::buffers_to_string(impl_->buffer.data());
  impl_->buffer.consume(impl_->buffer.size());
  return text;
}

void GatewayClient::send_message(const Request& request) {
  send_text(format_gateway_request(request));
}

std::optional<Reply> GatewayClient::receive(std::chrono::milliseconds timeout) {
  const auto text = read_text(timeout);
  if (!text) return std::nullopt;
  auto parsed = parse_gateway_reply(*text);
  if (const auto* err = std::get_if<ProtocolError>(&parsed)) {
    throw IoError("protocol desync: " + err->reason);
  }
  return std::get<Reply>(std::move(parsed));
}

}  // namespace eyedrive::relay
