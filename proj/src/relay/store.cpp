#include "eyedrive/relay/store.hpp"

#include <algorithm>
#include <chrono>

#include "eyedrive/errors.hpp"
#include "json.hpp"

namespace eyedrive::relay {

bool valid_key(std::string_view key) {
  if (key.empty() || key.size() > kMaxKeyBytes) return false;
  return std::all_of(key.begin(), key.end(), [](char ch) { return ch > 0x20 && ch < 0x7f && ch != '*'; });
}

bool valid_value(std::string_view value) {
  return value.size() <= kMaxValueBytes && value.find_first_of("\r\n") == std::string_view::npos;
}

bool valid_pattern(std::string_view pattern) {
  if (!pattern.empty() && pattern.back() == '*') {
    const std::string_view prefix = pattern.substr(0, pattern.size() - 1);
    return prefix.empty() || valid_key(prefix);
  }
  return valid_key(pattern);
}

bool pattern_matches(std::string_view pattern, std::string_view key) {
  if (!pattern.empty() && pattern.back() == '*') {
    return key.substr(0, pattern.size() - 1) == pattern.substr(0, pattern.size() - 1);
  }
  return pattern == key;
}

namespace {

StoreClock wall_clock() {
  const auto start = std::chrono::steady_clock::now();
  return [start] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                                 start)
        .count();
  };
}

}  // namespace

Store::Store() : Store(wall_clock()) {}

Store::Store(StoreClock clock) : clock_(std::move(clock)) {}

Store::~Store() { flush_log(); }

std::uint64_t Store::set(std::string_view key, std::string_view value) {
  if (!valid_key(key)) throw InputError("invalid key");
  if (!valid_value(value)) throw InputError("value exceeds 256 bytes or contains a line break");
  std::lock_guard lock(mutex_);
  auto [it, inserted] = records_.try_emplace(std::string(key));
  RelayRecord& rec = it->second;
  if (inserted) rec.key = key;
  rec.value = value;
  ++rec.seq;
  rec.timestamp_ms = clock_();
  if (log_.is_open()) {
    log_ << nlohmann::json{{"t", rec.timestamp_ms}, {"key", rec.key}, {"seq", rec.seq},
                           {"value", rec.value}}
                .dump()
         << '\n';
  }
  for (const auto& [id, sub] : subscriptions_) {
    for (const std::string& p : sub.patterns) {
      if (pattern_matches(p, rec.key)) {
        sub.sink(rec);
        break;
      }
    }
  }
  return rec.seq;
}

std::optional<RelayRecord> Store::get(std::string_view key) const {
  std::lock_guard lock(mutex_);
  const auto it = records_.find(std::string(key));
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

SubscriptionId Store::open_subscription(EventSink sink) {
  std::lock_guard lock(mutex_);
  const SubscriptionId id = next_id_++;
  subscriptions_.emplace(id, Subscription{{}, std::move(sink)});
  return id;
}

bool Store::add_pattern(SubscriptionId id, std::string pattern) {
  if (!valid_pattern(pattern)) throw InputError("invalid subscription pattern");
  std::lock_guard lock(mutex_);
  const auto it = subscriptions_.find(id);
  if (it == subscriptions_.end()) throw StateError("unknown subscription");
  auto& patterns = it->second.patterns;
  if (std::find(patterns.begin(), patterns.end(), pattern) != patterns.end()) return false;
  patterns.push_back(std::move(pattern));
  return true;
}

void Store::close_subscription(SubscriptionId id) {
  std::lock_guard lock(mutex_);
  subscriptions_.erase(id);
}

SubscriptionId Store::subscribe(std::string pattern, EventSink sink) {
  if (!valid_pattern(pattern)) throw InputError("invalid subscription pattern");
  const SubscriptionId id = open_subscription(std::move(sink));
  add_pattern(id, std::move(pattern));
  return id;
}

void Store::open_log(const std::filesystem::path& path) {
  std::lock_guard lock(mutex_);
  log_.close();
  log_.clear();
  log_.open(path, std::ios::app);
  if (!log_) throw IoError("cannot open relay log " + path.string());
}

void Store::flush_log() {
  std::lock_guard lock(mutex_);
  if (log_.is_open()) log_.flush();
}

std::size_t Store::key_count() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

std::vector<RelayRecord> Store::snapshot() const {
  std::lock_guard lock(mutex_);
  std::vector<RelayRecord> out;
  out.reserve(records_.size());
  for (const auto& [k, r] : records_) out.push_back(r);
  std::sort(out.begin(), out.end(), [](const RelayRecord& a, const RelayRecord& b) { return a.key < b.key; });
  return out;
}

}  // namespace eyedrive::relay
