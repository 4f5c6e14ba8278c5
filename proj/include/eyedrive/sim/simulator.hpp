#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <vector>

#include "eyedrive/control/debounce.hpp"
#include "eyedrive/relay/select.hpp"
#include "eyedrive/relay/store.hpp"
#include "eyedrive/sim/bot.hpp"
#include "eyedrive/sim/config.hpp"
#include "eyedrive/sim/scenario.hpp"
#include "eyedrive/sim/serial.hpp"

namespace eyedrive::sim {

/// Shared virtual time in microseconds. Only the simulator advances it.
class VirtualClock {
 public:
  std::int64_t now_us() const { return now_us_; }
  std::int64_t now_ms() const { return now_us_ / 1000; }
  /// Throws StateError when asked to go backwards.
  void advance_to(std::int64_t t_us);

 private:
  std::int64_t now_us_ = 0;
};

/// The simulator's view of the relay: what the poller reads and where the
/// debouncer and telemetry write.
class RelayPort {
 public:
  virtual ~RelayPort() = default;
  /// Current selection, or nullopt when the relay cannot be reached.
  virtual std::optional<relay::Selection> poll(std::int64_t now_us) = 0;
  /// Returns false when the write could not be delivered.
  virtual bool write(std::string_view key, std::string_view value, std::int64_t now_us) = 0;
};

/// In-process relay with scripted outages.
class StorePort final : public RelayPort {
 public:
  StorePort(relay::Store& store, std::vector<Outage> outages = {});
  std::optional<relay::Selection> poll(std::int64_t now_us) override;
  bool write(std::string_view key, std::string_view value, std::int64_t now_us) override;
  bool reachable(std::int64_t now_us) const;

 private:
  relay::Store& store_;
  std::vector<Outage> outages_;
};

struct CommandLogEntry {
  enum class Kind { kEmit, kRelayWrite, kFailsafe };
  std::int64_t t_us = 0;
  Kind kind = Kind::kEmit;
  std::string key;    // relay key written (Signals for emissions)
  std::string value;  // command name or written value
  bool delivered = true;
};

std::string_view name_of(CommandLogEntry::Kind k);
/// `t_ms kind key value delivered`, tab separated; t_ms has microsecond precision.
std::string format_command_line(const CommandLogEntry& e);

struct SimCounters {
  std::size_t polls = 0;
  std::size_t failed_polls = 0;
  std::size_t rejected_selections = 0;
  std::size_t frames_sent = 0;
  std::size_t frames_dropped = 0;
  std::size_t frames_applied = 0;
  std::size_t decode_errors = 0;
  std::size_t failsafe_frames = 0;
  std::size_t failed_writes = 0;
  std::size_t superseded_emissions = 0;
  std::size_t collisions = 0;
  std::size_t telemetry_writes = 0;
};

struct SimResult {
  std::vector<std::string> trajectory;
  std::vector<CommandLogEntry> command_log;
  /// Debouncer emission to the tick that applies a frame carrying that command.
  std::vector<std::int64_t> latencies_us;
  /// Every frame the firmware applied, with the tick time it took effect.
  std::vector<std::pair<std::int64_t, DecodedFrame>> applied;
  SimCounters counters;
  BotState final_state;
  /// Smallest obstacle clearance swept by the bot, meters.
  double min_clearance = 0.0;
  std::optional<std::string> last_diagnostic;
};

struct LatencyStats {
  std::size_t count = 0;
  double min_ms = 0.0;
  double median_ms = 0.0;
  double p90_ms = 0.0;
  double max_ms = 0.0;
  /// (bucket lower edge ms, count) for non-empty buckets.
  std::vector<std::pair<std::int64_t, std::size_t>> histogram;
};

LatencyStats summarize_latency(std::vector<std::int64_t> latencies_us, std::int64_t bucket_ms = 20);

/// Deterministic discrete-event simulation of the control chain on a virtual
/// clock: scripted gaze classes -> debouncer -> relay -> poller -> serial
/// link -> firmware tick (ultrasonic guard, motor ramp, kinematics).
class Simulator {
 public:
  /// Maps the scripted class of frame `index` to the class the debouncer sees.
  using ClassSource = std::function<gaze::GazeClass(gaze::GazeClass scripted, std::size_t index)>;
  using LineSink = std::function<void(const std::string&)>;

  /// Throws ConfigError for an invalid config or scenario.
  Simulator(SimConfig config, Scenario scenario, RelayPort& relay, VirtualClock& clock,
            ClassSource classify = {});

  /// Processes every event with time <= t_us.
  void run_until(std::int64_t t_us);
  /// Runs to the scenario end and returns the result.
  const SimResult& run();

  /// Streams trajectory lines as they are produced; `keep` controls whether
  /// they are also stored in the result.
  void set_trajectory_sink(LineSink sink, bool keep);

  const BotState& state() const { return state_; }
  const SimResult& result() const { return result_; }
  const SimConfig& config() const { return config_; }
  const Scenario& scenario() const { return scenario_; }
  const UltrasonicReading& last_reading() const { return reading_; }
  std::int64_t end_us() const { return end_us_; }
  std::optional<std::int64_t> next_event_us() const;
  SerialLink& link() { return link_; }

 private:
  enum class EventKind { kRelayWrite = 0, kGazeFrame = 1, kPoll = 2, kTick = 3, kTelemetry = 4 };
  struct Event {
    std::int64_t t_us;
    EventKind kind;
    std::size_t index;
    bool operator>(const Event& o) const {
      if (t_us != o.t_us) return t_us > o.t_us;
      if (kind != o.kind) return kind > o.kind;
      return index > o.index;
    }
  };

  void schedule(std::int64_t t_us, EventKind kind, std::size_t index = 0);
  void handle(const Event& e);
  void on_gaze_frame(std::int64_t t, std::size_t index);
  void on_poll(std::int64_t t);
  void on_tick(std::int64_t t);
  void on_telemetry(std::int64_t t);
  gaze::GazeClass scripted_class(std::size_t index) const;

  SimConfig config_;
  Scenario scenario_;
  RelayPort& relay_;
  VirtualClock& clock_;
  ClassSource classify_;
  DriveParams drive_;
  SensorConfig sensor_;
  control::Debouncer debouncer_;
  SerialLink link_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;

  BotState state_;
  UltrasonicReading reading_;
  BotState logged_;  // state as of the latest trajectory line
  std::string last_line_;
  std::int64_t last_poll_ok_us_ = 0;
  bool in_failsafe_ = false;
  std::optional<std::pair<std::int64_t, Command>> pending_emit_;
  std::int64_t end_us_ = 0;
  std::vector<std::pair<std::size_t, std::size_t>> run_starts_;  // (first frame, run index)
  LineSink trajectory_sink_;
  bool keep_trajectory_ = true;
  SimResult result_;
};

}  // namespace eyedrive::sim
