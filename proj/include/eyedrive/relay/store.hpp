#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "eyedrive/relay/record.hpp"

namespace eyedrive::relay {

using SubscriptionId = std::uint64_t;

/// Receives events in per-key seq order. Called with the store lock held, so
/// it must be quick and must not call back into the store.
using EventSink = std::function<void(const RelayRecord&)>;

/// Millisecond clock used to stamp records.
using StoreClock = std::function<std::int64_t()>;

/// In-memory last-writer-wins key-value store. Every write goes through one
/// mutex, which is the single ordering point for seq assignment and fan-out.
class Store {
 public:
  /// Default clock: wall milliseconds since construction.
  Store();
  explicit Store(StoreClock clock);
  ~Store();

  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  /// Throws InputError for an invalid key or value.
  std::uint64_t set(std::string_view key, std::string_view value);
  std::optional<RelayRecord> get(std::string_view key) const;

  SubscriptionId open_subscription(EventSink sink);
  /// Adds a pattern (see valid_pattern). Returns false if it was already present.
  /// Throws InputError for a bad pattern and StateError for an unknown id.
  bool add_pattern(SubscriptionId id, std::string pattern);
  void close_subscription(SubscriptionId id);
  SubscriptionId subscribe(std::string pattern, EventSink sink);

  /// Appends one JSON line per write to `path`. Throws IoError if it cannot open.
  void open_log(const std::filesystem::path& path);
  void flush_log();

  std::size_t key_count() const;
  std::vector<RelayRecord> snapshot() const;

 private:
  struct Subscription {
    std::vector<std::string> patterns;
    EventSink sink;
  };

  StoreClock clock_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, RelayRecord> records_;
  std::map<SubscriptionId, Subscription> subscriptions_;
  SubscriptionId next_id_ = 1;
  std::ofstream log_;
};

}  // namespace eyedrive::relay
