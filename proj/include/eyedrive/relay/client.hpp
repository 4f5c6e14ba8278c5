#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "eyedrive/relay/protocol.hpp"
#include "eyedrive/relay/record.hpp"

namespace eyedrive::relay {

/// Blocking single-connection client. Events that arrive while waiting for a
/// reply are queued and handed out by next_event(). Network failures and
/// timeouts throw IoError; an ERR reply to set/get/subscribe throws InputError.
class Client {
 public:
  virtual ~Client() = default;

  std::uint64_t set(std::string_view key, std::string_view value);
  std::optional<RelayRecord> get(std::string_view key);
  void subscribe(std::string_view pattern);
  /// Next queued or incoming EVENT, or nullopt when none arrives in time.
  std::optional<RelayRecord> next_event(std::chrono::milliseconds timeout);
  /// One request and its reply, whatever its kind.
  Reply call(const Request& request);

  std::size_t queued_events() const { return events_.size(); }

 protected:
  explicit Client(std::chrono::milliseconds timeout) : timeout_(timeout) {}
  Client(Client&&) = default;
  Client& operator=(Client&&) = default;

  virtual void send_message(const Request& request) = 0;
  /// Next reply of any kind; nullopt on timeout.
  virtual std::optional<Reply> receive(std::chrono::milliseconds timeout) = 0;

  std::chrono::milliseconds timeout_;

 private:
  std::deque<Reply> events_;
};

/// Line-protocol client over TCP.
class TcpClient final : public Client {
 public:
  TcpClient(const std::string& host, std::uint16_t port,
            std::chrono::milliseconds timeout = std::chrono::seconds(5));
  ~TcpClient() override;
  TcpClient(TcpClient&&) noexcept;
  TcpClient& operator=(TcpClient&&) noexcept;

  /// Raw access for protocol tests: writes `line` plus a newline / reads one line.
  void send_raw(std::string_view line);
  std::optional<std::string> read_line(std::chrono::milliseconds timeout);

 protected:
  void send_message(const Request& request) override;
  std::optional<Reply> receive(std::chrono::milliseconds timeout) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// JSON-over-WebSocket client for the gateway.
class GatewayClient final : public Client {
 public:
  GatewayClient(const std::string& host, std::uint16_t port,
                std::chrono::milliseconds timeout = std::chrono::seconds(5));
  ~GatewayClient() override;
  GatewayClient(GatewayClient&&) noexcept;
  GatewayClient& operator=(GatewayClient&&) noexcept;

  void send_text(std::string_view text);
  std::optional<std::string> read_text(std::chrono::milliseconds timeout);

 protected:
  void send_message(const Request& request) override;
  std::optional<Reply> receive(std::chrono::milliseconds timeout) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace eyedrive::relay
