#include "eyedrive/relay/server.hpp"

#include <array>
#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <deque>
#include <functional>
#include <mutex>
#include <set>
#include <thread>

#include "eyedrive/errors.hpp"
#include "eyedrive/relay/gateway_codec.hpp"
#include "eyedrive/relay/protocol.hpp"

namespace eyedrive::relay {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

class Session;

struct Registry {
  std::mutex mutex;
  std::set<std::shared_ptr<Session>> sessions;
};

// Transport-independent part of a connection: request dispatch, the
// subscription, and an ordered outbound queue. Runs on the I/O thread only.
using Encoder = std::string (*)(const Reply&);

class Session : public std::enable_shared_from_this<Session> {
 public:
  Session(asio::io_context& ioc, Store& store, Registry& registry, std::size_t max_backlog,
          bool telemetry_read_only, Encoder encode)
      : encode_(encode),
        ioc_(ioc),
        store_(store),
        registry_(registry),
        max_backlog_(max_backlog),
        telemetry_read_only_(telemetry_read_only) {}

  virtual ~Session() {
    if (subscription_ != 0) store_.close_subscription(subscription_);
  }

  virtual void start() = 0;

  void close() {
    if (closed_) return;
    closed_ = true;
    if (subscription_ != 0) {
      store_.close_subscription(subscription_);
      subscription_ = 0;
    }
    outbox_.clear();
    shutdown_transport();
    auto self = shared_from_this();
    std::lock_guard lock(registry_.mutex);
    registry_.sessions.erase(self);
  }

 protected:
  using WriteDone = std::function<void(const boost::system::error_code&)>;
  virtual void write_one(const std::string& message, WriteDone done) = 0;
  virtual void shutdown_transport() = 0;

  bool closed() const { return closed_; }

  void handle(const std::variant<Request, ProtocolError>& parsed) {
    if (const auto* err = std::get_if<ProtocolError>(&parsed)) {
      send(Reply::error(err->reason));
      return;
    }
    send(execute(std::get<Request>(parsed)));
  }

  void send(const Reply& reply) { enqueue(encode_(reply)); }

 private:
  Reply execute(const Request& req) {
    switch (req.verb) {
      case Verb::kSet:
        if (telemetry_read_only_ && req.key.starts_with(keys::kTelemetryPrefix)) {
          return Reply::error("read-only key");
        }
        try {
          return Reply::ok(store_.set(req.key, req.value));
        } catch (const InputError& e) {
          return Reply::error(e.what());
        }
      case Verb::kGet:
        if (auto rec = store_.get(req.key)) return Reply::value_of(*rec);
        return Reply::absent(req.key);
      case Verb::kSub:
        if (subscription_ == 0) subscription_ = store_.open_subscription(make_sink());
        store_.add_pattern(subscription_, req.key);
        return Reply::ok(0);
    }
    return Reply::error("unknown verb");
  }

  // Events are encoded on the writer's thread and posted to the I/O thread.
  // Posts happen under the store lock, so they are queued in seq order. The
  // sink touches no session state, so it is safe while the session is dying.
  EventSink make_sink() {
    std::weak_ptr<Session> weak = weak_from_this();
    return [weak, encode = encode_, &ioc = ioc_](const RelayRecord& rec) {
      std::string message = encode(Reply::event(rec));
      asio::post(ioc, [weak, message = std::move(message)]() mutable {
        if (auto self = weak.lock()) self->enqueue(std::move(message));
      });
    };
  }

  void enqueue(std::string message) {
    if (closed_) return;
    outbox_.push_back(std::move(message));
    if (outbox_.size() > max_backlog_) {
      close();
      return;
    }
    if (!writing_) write_next();
  }

  void write_next() {
    writing_ = true;
    auto self = shared_from_this();
    write_one(outbox_.front(), [self](const boost::system::error_code& ec) {
      if (ec) {
        self->close();
        return;
      }
      if (self->closed_) return;
      self->outbox_.pop_front();
      if (self->outbox_.empty()) {
        self->writing_ = false;
      } else {
        self->write_next();
      }
    });
  }

  Encoder encode_;
  asio::io_context& ioc_;
  Store& store_;
  Registry& registry_;
  std::size_t max_backlog_;
  bool telemetry_read_only_;
  SubscriptionId subscription_ = 0;
  std::deque<std::string> outbox_;
  bool writing_ = false;
  bool closed_ = false;
};

class LineSession final : public Session {
 public:
  LineSession(tcp::socket socket, asio::io_context& ioc, Store& store, Registry& registry,
              std::size_t max_backlog)
      : Session(ioc, store, registry, max_backlog, false, &format_reply),
        socket_(std::move(socket)) {}

  void start() override { read_more(); }

 private:
  void read_more() {
    auto self = std::static_pointer_cast<LineSession>(shared_from_this());
    socket_.async_read_some(asio::buffer(chunk_),
                            [self](const boost::system::error_code& ec, std::size_t n) {
                              if (ec) {
                                self->close();
                                return;
                              }
                              self->consume(n);
                              if (!self->closed()) self->read_more();
                            });
  }

  void consume(std::size_t n) {
    pending_.append(chunk_.data(), n);
    std::size_t start = 0;
    for (std::size_t nl = pending_.find('\n'); nl != std::string::npos;
         nl = pending_.find('\n', start)) {
      const std::string_view line(pending_.data() + start, nl - start);
      start = nl + 1;
      if (discarding_) {
        discarding_ = false;
        continue;
      }
      handle(parse_request(line));
      if (closed()) return;
    }
    pending_.erase(0, start);
    // One byte of slack for a trailing CR.
    if (pending_.size() > kMaxLineBytes + 1) {
      if (!discarding_) send(Reply::error("line too long"));
      discarding_ = true;
      pending_.clear();
    }
  }

  void write_one(const std::string& message, WriteDone done) override {
    line_ = message + '\n';
    asio::async_write(socket_, asio::buffer(line_),
                      [done = std::move(done)](const boost::system::error_code& ec, std::size_t) {
                        done(ec);
                      });
  }

  void shutdown_transport() override {
    boost::system::error_code ignored;
    socket_.shutdown(tcp::socket::shutdown_both, ignored);
    socket_.close(ignored);
  }

  tcp::socket socket_;
  std::array<char, 4096> chunk_{};
  std::string pending_;
  std::string line_;
  bool discarding_ = false;
};

class WebSocketSession final : public Session {
 public:
  WebSocketSession(tcp::socket socket, asio::io_context& ioc, Store& store, Registry& registry,
                   std::size_t max_backlog)
      : Session(ioc, store, registry, max_backlog, true, &format_gateway_reply),
        ws_(std::move(socket)) {}

  void start() override {
    ws_.read_message_max(4 * kMaxLineBytes);
    ws_.text(true);
    auto self = std::static_pointer_cast<WebSocketSession>(shared_from_this());
    ws_.async_accept([self](const boost::system::error_code& ec) {
      if (ec) {
        self->close();
        return;
      }
      self->read_more();
    });
  }

 private:
  void read_more() {
    auto self = std::static_pointer_cast<WebSocketSession>(shared_from_this());
    ws_.async_read(buffer_, [self](const boost::system::error_code& ec, std::size_t) {
      if (ec) {
        self->close();
        return;
      }
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->handle(parse_gateway_request(text));
      if (!self->closed()) self->read_more();
    });
  }

  void write_one(const std::string& message, WriteDone done) override {
    ws_.async_write(asio::buffer(message),
                    [done = std::move(done)](const boost::system::error_code& ec, std::size_t) {
                      done(ec);
                    });
  }

  void shutdown_transport() override {
    boost::system::error_code ignored;
    beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ignored);
    beast::get_lowest_layer(ws_).socket().close(ignored);
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
};

tcp::acceptor bind_acceptor(asio::io_context& ioc, const std::string& address, std::uint16_t port) {
  boost::system::error_code ec;
  const auto ip = asio::ip::make_address(address, ec);
  if (ec) throw ConfigError("invalid listen address '" + address + "'");
  tcp::acceptor acceptor(ioc);
  const tcp::endpoint endpoint(ip, port);
  acceptor.open(endpoint.protocol(), ec);
  if (!ec) acceptor.set_option(asio::socket_base::reuse_address(true), ec);
  if (!ec) acceptor.bind(endpoint, ec);
  if (!ec) acceptor.listen(asio::socket_base::max_listen_connections, ec);
  if (ec) {
    throw IoError("cannot listen on " + address + ":" + std::to_string(port) + ": " + ec.message());
  }
  return acceptor;
}

}  // namespace

struct RelayServer::Impl {
  Impl(Store& s, ServerOptions o)
      : store(s),
        options(std::move(o)),
        line_acceptor(bind_acceptor(ioc, options.address, options.port)) {
    line_port = line_acceptor.local_endpoint().port();
    if (options.gateway_port) {
      ws_acceptor.emplace(bind_acceptor(ioc, options.address, *options.gateway_port));
      ws_port = ws_acceptor->local_endpoint().port();
    }
  }

  template <typename SessionType>
  void accept(tcp::acceptor& acceptor) {
    acceptor.async_accept([this, &acceptor](const boost::system::error_code& ec, tcp::socket socket) {
      if (ec) return;  // acceptor closed
      boost::system::error_code ignored;
      socket.set_option(tcp::no_delay(true), ignored);
      auto session = std::make_shared<SessionType>(std::move(socket), ioc, store, registry,
                                                   options.max_backlog);
      {
        std::lock_guard lock(registry.mutex);
        registry.sessions.insert(session);
      }
      session->start();
      accept<SessionType>(acceptor);
    });
  }

  void close_all() {
    boost::system::error_code ignored;
    line_acceptor.close(ignored);
    if (ws_acceptor) ws_acceptor->close(ignored);
    std::set<std::shared_ptr<Session>> sessions;
    {
      std::lock_guard lock(registry.mutex);
      sessions = registry.sessions;
    }
    for (const auto& s : sessions) s->close();
  }

  Store& store;
  ServerOptions options;
  asio::io_context ioc{1};
  tcp::acceptor line_acceptor;
  std::optional<tcp::acceptor> ws_acceptor;
  std::uint16_t line_port = 0;
  std::optional<std::uint16_t> ws_port;
  Registry registry;
  std::thread thread;
  bool started = false;
  bool stopped = false;
};

RelayServer::RelayServer(Store& store, ServerOptions options)
    : impl_(std::make_unique<Impl>(store, std::move(options))) {}

RelayServer::~RelayServer() { stop(); }

void RelayServer::start() {
  if (impl_->started) return;
  impl_->started = true;
  impl_->accept<LineSession>(impl_->line_acceptor);
  if (impl_->ws_acceptor) impl_->accept<WebSocketSession>(*impl_->ws_acceptor);
  impl_->thread = std::thread([impl = impl_.get()] { impl->ioc.run(); });
}

void RelayServer::stop() {
  if (!impl_ || impl_->stopped) return;
  impl_->stopped = true;
  if (!impl_->started) {
    impl_->close_all();
    return;
  }
  asio::post(impl_->ioc, [impl = impl_.get()] {
    impl->close_all();
    impl->ioc.stop();
  });
  impl_->thread.join();
  // Handlers still queued hold sessions; release them while the store is alive.
  impl_->close_all();
}

std::uint16_t RelayServer::port() const { return impl_->line_port; }

std::optional<std::uint16_t> RelayServer::gateway_port() const { return impl_->ws_port; }

std::size_t RelayServer::connection_count() const {
  std::lock_guard lock(impl_->registry.mutex);
  return impl_->registry.sessions.size();
}

}  // namespace eyedrive::relay
