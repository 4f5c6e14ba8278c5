#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "eyedrive/relay/store.hpp"

namespace eyedrive::relay {

struct ServerOptions {
  std::string address = "127.0.0.1";
  std::uint16_t port = 0;  // 0 picks a free port
  /// WebSocket gateway port; nullopt disables the gateway, 0 picks a free port.
  std::optional<std::uint16_t> gateway_port;
  /// A subscriber whose unsent backlog exceeds this is disconnected.
  std::size_t max_backlog = 65536;
};

/// TCP line-protocol server plus optional WebSocket gateway over one Store.
/// Both listeners are bound in the constructor (IoError if a port is taken)
/// and served by a single background I/O thread between start() and stop().
class RelayServer {
 public:
  RelayServer(Store& store, ServerOptions options);
  ~RelayServer();

  RelayServer(const RelayServer&) = delete;
  RelayServer& operator=(const RelayServer&) = delete;

  void start();
  /// Closes listeners and every connection, then joins the I/O thread. Idempotent.
  void stop();

  std::uint16_t port() const;
  std::optional<std::uint16_t> gateway_port() const;
  std::size_t connection_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace eyedrive::relay
