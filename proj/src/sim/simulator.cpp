#include "eyedrive/sim/simulator.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <limits>

#include "eyedrive/errors.hpp"

namespace eyedrive::sim {

namespace {

constexpr std::int64_t kUsPerMs = 1000;

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

void VirtualClock::advance_to(std::int64_t t_us) {
  if (t_us < now_us_) throw StateError("virtual clock cannot go backwards");
  now_us_ = t_us;
}

StorePort::StorePort(relay::Store& store, std::vector<Outage> outages)
    : store_(store), outages_(std::move(outages)) {}

bool StorePort::reachable(std::int64_t now_us) const {
  for (const auto& o : outages_) {
    if (now_us >= o.from_ms * kUsPerMs && now_us < o.to_ms * kUsPerMs) return false;
  }
  return true;
}

std::optional<relay::Selection> StorePort::poll(std::int64_t now_us) {
  if (!reachable(now_us)) return std::nullopt;
  return relay::select_command(store_);
}

bool StorePort::write(std::string_view key, std::string_view value, std::int64_t now_us) {
  if (!reachable(now_us)) return false;
  store_.set(key, value);
  return true;
}

std::string_view name_of(CommandLogEntry::Kind k) {
  switch (k) {
    case CommandLogEntry::Kind::kEmit: return "emit";
    case CommandLogEntry::Kind::kRelayWrite: return "relay";
    case CommandLogEntry::Kind::kFailsafe: return "failsafe";
  }
  return "?";
}

std::string format_command_line(const CommandLogEntry& e) {
  char t[48];
  std::snprintf(t, sizeof t, "%" PRId64 ".%03" PRId64, e.t_us / kUsPerMs, e.t_us % kUsPerMs);
  return std::string(t) + "\t" + std::string(name_of(e.kind)) + "\t" + e.key + "\t" + e.value + "\t" +
         (e.delivered ? "1" : "0");
}

LatencyStats summarize_latency(std::vector<std::int64_t> lat, std::int64_t bucket_ms) {
  LatencyStats s;
  s.count = lat.size();
  if (lat.empty()) return s;
  std::sort(lat.begin(), lat.end());
  const auto ms = [](std::int64_t us) { return static_cast<double>(us) / 1000.0; };
  const std::size_t n = lat.size();
  s.min_ms = ms(lat.front());
  s.max_ms = ms(lat.back());
  s.median_ms = n % 2 == 1 ? ms(lat[n / 2]) : (ms(lat[n / 2 - 1]) + ms(lat[n / 2])) / 2.0;
  s.p90_ms = ms(lat[std::min(n - 1, (n * 9 + 9) / 10 - 1)]);
  for (const auto us : lat) {
    const std::int64_t edge = us / (bucket_ms * kUsPerMs) * bucket_ms;
    if (s.histogram.empty() || s.histogram.back().first != edge) s.histogram.emplace_back(edge, 0);
    ++s.histogram.back().second;
  }
  return s;
}

Simulator::Simulator(SimConfig config, Scenario scenario, RelayPort& relay, VirtualClock& clock,
                     ClassSource classify)
    : config_(std::move(config)),
      scenario_(std::move(scenario)),
      relay_(relay),
      clock_(clock),
      classify_(std::move(classify)),
      debouncer_(static_cast<std::size_t>(std::max(config_.debounce_frames, 1))),
      link_(static_cast<std::size_t>(std::max(config_.link_capacity, 1)), config_.serial_delay_ms * kUsPerMs) {
  config_.validate();
  scenario_.validate();
  drive_ = config_.drive();
  sensor_ = config_.sensor();
  state_ = scenario_.start;
  state_.speed = 0;
  state_.target_speed = 0;
  state_.mode = Mode::kStopped;
  state_.active_command = Command::kStop;
  state_.obstacle_blocked = false;
  result_.min_clearance = scenario_.world.clearance(state_.position());
  end_us_ = scenario_.end_ms(config_) * kUsPerMs;
  last_poll_ok_us_ = clock_.now_us();

  const std::int64_t t0 = clock_.now_us();
  for (std::size_t i = 0; i < scenario_.relay.size(); ++i) {
    schedule(std::max(t0, scenario_.relay[i].t_ms * kUsPerMs), EventKind::kRelayWrite, i);
  }
  std::size_t first = 0;
  for (std::size_t r = 0; r < scenario_.gaze.size(); ++r) {
    run_starts_.emplace_back(first, r);
    first += scenario_.gaze[r].frames;
  }
  if (scenario_.gaze_frames() > 0) schedule(t0 + scenario_.gaze_start_ms * kUsPerMs, EventKind::kGazeFrame, 0);
  schedule(t0, EventKind::kPoll);
  schedule(t0, EventKind::kTick);
  schedule(t0, EventKind::kTelemetry);
}

void Simulator::set_trajectory_sink(LineSink sink, bool keep) {
  trajectory_sink_ = std::move(sink);
  keep_trajectory_ = keep;
}

void Simulator::schedule(std::int64_t t_us, EventKind kind, std::size_t index) {
  events_.push({t_us, kind, index});
}

std::optional<std::int64_t> Simulator::next_event_us() const {
  if (events_.empty()) return std::nullopt;
  return events_.top().t_us;
}

void Simulator::run_until(std::int64_t t_us) {
  while (!events_.empty() && events_.top().t_us <= t_us) {
    const Event e = events_.top();
    events_.pop();
    clock_.advance_to(e.t_us);
    handle(e);
  }
  if (t_us > clock_.now_us()) clock_.advance_to(t_us);
  result_.final_state = state_;
  result_.counters.frames_sent = link_.sent();
  result_.counters.frames_dropped = link_.dropped();
}

const SimResult& Simulator::run() {
  run_until(end_us_);
  return result_;
}

void Simulator::handle(const Event& e) {
  switch (e.kind) {
    case EventKind::kRelayWrite: {
      const auto& w = scenario_.relay[e.index];
      const bool ok = relay_.write(w.key, w.value, e.t_us);
      if (!ok) ++result_.counters.failed_writes;
      result_.command_log.push_back({e.t_us, CommandLogEntry::Kind::kRelayWrite, w.key, w.value, ok});
      break;
    }
    case EventKind::kGazeFrame: on_gaze_frame(e.t_us, e.index); break;
    case EventKind::kPoll:
      on_poll(e.t_us);
      schedule(e.t_us + config_.poll_ms * kUsPerMs, EventKind::kPoll);
      break;
    case EventKind::kTick:
      on_tick(e.t_us);
      schedule(e.t_us + config_.tick_ms * kUsPerMs, EventKind::kTick);
      break;
    case EventKind::kTelemetry:
      on_telemetry(e.t_us);
      schedule(e.t_us + config_.telemetry_ms * kUsPerMs, EventKind::kTelemetry);
      break;
  }
}

gaze::GazeClass Simulator::scripted_class(std::size_t index) const {
  auto it = std::upper_bound(run_starts_.begin(), run_starts_.end(), index,
                             [](std::size_t i, const auto& rs) { return i < rs.first; });
  // Zero-length runs share a start with the next run; pick the last one not yet exhausted.
  while (true) {
    --it;
    const auto& run = scenario_.gaze[it->second];
    if (index < it->first + run.frames) return run.cls;
  }
}

void Simulator::on_gaze_frame(std::int64_t t, std::size_t index) {
  const gaze::GazeClass scripted = scripted_class(index);
  const gaze::GazeClass seen = classify_ ? classify_(scripted, index) : scripted;
  if (const auto cmd = debouncer_.push(seen)) {
    const std::string value(name_of(*cmd));
    const bool ok = relay_.write(relay::keys::kSignals, value, t);
    if (!ok) ++result_.counters.failed_writes;
    result_.command_log.push_back(
        {t, CommandLogEntry::Kind::kEmit, std::string(relay::keys::kSignals), value, ok});
    if (ok) {
      if (pending_emit_) ++result_.counters.superseded_emissions;
      pending_emit_ = {t, *cmd};
    }
  }
  if (index + 1 < scenario_.gaze_frames()) {
    const std::int64_t start = scenario_.gaze_start_ms * kUsPerMs;
    const std::int64_t next = start + static_cast<std::int64_t>(index + 1) * config_.frame_period_us();
    schedule(std::max(next, t), EventKind::kGazeFrame, index + 1);
  }
}

void Simulator::on_poll(std::int64_t t) {
  ++result_.counters.polls;
  if (const auto sel = relay_.poll(t)) {
    last_poll_ok_us_ = t;
    in_failsafe_ = false;
    if (sel->diagnostic) {
      ++result_.counters.rejected_selections;
      result_.last_diagnostic = sel->diagnostic;
    }
    link_.send(serial_encode(sel->command, sel->speed), t);
    return;
  }
  ++result_.counters.failed_polls;
  if (t - last_poll_ok_us_ >= config_.failsafe_ms * kUsPerMs) {
    link_.send(serial_encode(Command::kStop, 0), t);
    ++result_.counters.failsafe_frames;
    if (!in_failsafe_) {
      result_.command_log.push_back({t, CommandLogEntry::Kind::kFailsafe, "", "Stop", true});
      in_failsafe_ = true;
    }
  }
}

void Simulator::on_tick(std::int64_t t) {
  for (const SerialFrame& raw : link_.receive(t)) {
    const auto decoded = serial_decode(raw);
    if (std::holds_alternative<FrameError>(decoded)) {
      ++result_.counters.decode_errors;
      continue;
    }
    const auto& f = std::get<DecodedFrame>(decoded);
    state_ = apply_command(state_, f.command, f.speed);
    ++result_.counters.frames_applied;
    result_.applied.emplace_back(t, f);
    if (pending_emit_ && pending_emit_->second == f.command) {
      result_.latencies_us.push_back(t - pending_emit_->first);
      pending_emit_.reset();
    }
  }

  reading_ = ultrasonic_measure(scenario_.world, state_.position(), state_.heading, sensor_);
  if (config_.guard) {
    state_ = obstacle_guard(state_, reading_, drive_.threshold_cm);
  } else {
    state_.obstacle_blocked = false;
  }
  std::uint8_t target = state_.mode == Mode::kRunning ? state_.target_speed : 0;
  if (state_.obstacle_blocked && state_.active_command == Command::kForward) target = 0;
  state_.speed = motor_ramp(state_.speed, target, drive_.ramp_per_tick);

  logged_ = state_;
  last_line_ = format_trajectory_line(t / kUsPerMs, state_);
  if (keep_trajectory_) result_.trajectory.push_back(last_line_);
  if (trajectory_sink_) trajectory_sink_(last_line_);

  const Vec2 before = state_.position();
  bool collided = false;
  state_ = step(state_, scenario_.world, config_.tick_ms / 1000.0, drive_, &collided);
  if (collided) ++result_.counters.collisions;
  if (!(state_.position() == before)) {
    result_.min_clearance =
        std::min(result_.min_clearance, scenario_.world.clearance_along(before, state_.position()));
  }
}

void Simulator::on_telemetry(std::int64_t t) {
  const auto distance = reading_.distance_cm();
  char reading[32];
  if (distance) {
    std::snprintf(reading, sizeof reading, "%.1f", *distance);
  } else {
    std::snprintf(reading, sizeof reading, "TIMEOUT");
  }
  const std::pair<std::string, std::string> items[] = {
      {"telemetry/pose", fixed4(logged_.x) + " " + fixed4(logged_.y) + " " + fixed4(logged_.heading)},
      {"telemetry/speed", std::to_string(logged_.speed)},
      {"telemetry/mode", std::string(name_of(logged_.mode))},
      {"telemetry/blocked", logged_.obstacle_blocked ? "1" : "0"},
      {"telemetry/reading", reading},
      {"telemetry/trace", last_line_},
  };
  for (const auto& [key, value] : items) {
    if (value.empty()) continue;
    if (relay_.write(key, value, t)) {
      ++result_.counters.telemetry_writes;
    } else {
      ++result_.counters.failed_writes;
    }
  }
}

}  // namespace eyedrive::sim
