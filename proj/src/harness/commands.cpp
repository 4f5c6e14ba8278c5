#include "eyedrive/harness/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <thread>

#include "eyedrive/errors.hpp"
#include "eyedrive/gaze/model.hpp"
#include "eyedrive/gaze/preprocess.hpp"
#include "eyedrive/gaze/synth.hpp"
#include "eyedrive/nn/weights_io.hpp"
#include "eyedrive/relay/client.hpp"
#include "eyedrive/relay/select.hpp"
#include "eyedrive/relay/server.hpp"
#include "eyedrive/relay/store.hpp"

namespace eyedrive::harness {

namespace fs = std::filesystem;
using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

fs::path prepare_out(const RunConfig& cfg) {
  const fs::path dir(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_run_config(cfg, dir);
  return dir;
}

std::pair<gaze::LabeledSet, gaze::LabeledSet> load_split(const RunConfig& cfg, std::size_t extent) {
  const gaze::LabeledSet all = gaze::load_dataset(cfg.data_dir, extent);
  return gaze::split(all, cfg.val_fraction, cfg.seeds.split);
}

json report_with_config(const gaze::EvalReport& r, const RunConfig& cfg) {
  return {{"report", json::parse(gaze::render_json(r))}, {"run_config", to_json(cfg)}};
}

std::string layer_name(const nn::LayerSpec& s, std::size_t index) {
  std::string name = std::to_string(index) + " " + nn::to_string(s.kind);
  if (s.kind == nn::LayerKind::kConv2D || s.kind == nn::LayerKind::kDense) {
    name += "(" + std::to_string(s.units) + ")";
  }
  return name;
}

gaze::Frame render_frame(gaze::GazeClass c, std::uint64_t seed, std::size_t index, std::size_t extent) {
  const auto [img, label] = gaze::synth_eye(c, gaze::sample_seed(seed, c, index));
  (void)label;
  return gaze::preprocess(img, gaze::CropRect::full(img), extent);
}

std::size_t net_extent(const nn::Network& net) { return net.input_shape()[0]; }

// The simulator's relay access over the line protocol. A failed exchange
// drops the connection and reports the relay unreachable; the next call
// reconnects.
class ClientPort final : public sim::RelayPort {
 public:
  ClientPort(std::string host, std::uint16_t port) : host_(std::move(host)), port_(port) {}

  std::optional<relay::Selection> poll(std::int64_t) override {
    try {
      relay::TcpClient& c = connection();
      return relay::select_command([&c](std::string_view key) -> std::optional<std::string> {
        if (auto rec = c.get(key)) return rec->value;
        return std::nullopt;
      });
    } catch (const std::exception&) {
      client_.reset();
      return std::nullopt;
    }
  }

  bool write(std::string_view key, std::string_view value, std::int64_t) override {
    try {
      connection().set(key, value);
      return true;
    } catch (const std::exception&) {
      client_.reset();
      return false;
    }
  }

 private:
  relay::TcpClient& connection() {
    if (!client_) client_.emplace(host_, port_, std::chrono::milliseconds(500));
    return *client_;
  }

  std::string host_;
  std::uint16_t port_;
  std::optional<relay::TcpClient> client_;
};

void write_sim_logs(const fs::path& dir, const sim::SimResult& r, bool with_trajectory) {
  if (with_trajectory) {
    auto traj = open_out(dir / "trajectory.tsv");
    for (const auto& line : r.trajectory) traj << line << '\n';
  }
  auto cmds = open_out(dir / "commands.tsv");
  for (const auto& e : r.command_log) cmds << sim::format_command_line(e) << '\n';
  if (!cmds) throw IoError("cannot write " + (dir / "commands.tsv").string());
}

}  // namespace

gaze::DatasetManifest cmd_gen_data(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  const gaze::ClassCounts counts = gaze::scaled_counts(cfg.images);
  const std::size_t total = cfg.images;
  auto manifest = gaze::write_dataset(cfg.data_dir, counts, cfg.seeds.corpus, {}, [&](std::size_t n) {
    if (n % 1000 == 0 || n == total) out << "wrote " << n << "/" << total << " images\n" << std::flush;
  });
  RunConfig recorded = cfg;
  recorded.out_dir = cfg.data_dir;
  write_run_config(recorded, cfg.data_dir);
  for (const gaze::GazeClass c : gaze::kAllClasses) {
    out << gaze::name_of(c) << ": " << manifest.counts[gaze::index_of(c)] << " images\n";
  }
  out << "total: " << manifest.total() << " in " << cfg.data_dir << '\n';
  return manifest;
}

TrainOutcome cmd_train(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  const fs::path dir = prepare_out(cfg);
  auto [train_set, val_set] = load_split(cfg, cfg.extent);
  out << "train " << train_set.size() << " / val " << val_set.size() << " at " << cfg.extent << "x"
      << cfg.extent << '\n';

  nn::Network net = gaze::build_gaze_model(cfg.seeds.net, cfg.extent);
  auto log = open_out(dir / "train_log.tsv");
  log << "epoch\tmean_loss\ttrain_accuracy\tseconds\n";
  gaze::TrainOptions options;
  options.epochs = cfg.epochs;
  options.batch_size = cfg.batch_size;
  options.seed = cfg.seeds.train;
  options.adam.learning_rate = cfg.learning_rate;
  options.checkpoint_dir = dir / "checkpoints";
  options.on_epoch = [&](const gaze::EpochStats& s) {
    char line[160];
    std::snprintf(line, sizeof line, "%zu\t%.6f\t%.5f\t%.2f", s.epoch, s.mean_loss, s.train_accuracy, s.seconds);
    log << line << '\n' << std::flush;
    std::snprintf(line, sizeof line, "epoch %zu/%zu loss %.5f accuracy %.4f (%.1f s)", s.epoch, cfg.epochs,
                  s.mean_loss, s.train_accuracy, s.seconds);
    out << line << '\n' << std::flush;
  };

  TrainOutcome outcome;
  outcome.history = gaze::train(net, train_set, options);
  outcome.weights = cfg.weights_path();
  if (outcome.weights.has_parent_path()) fs::create_directories(outcome.weights.parent_path());
  nn::save_network(net, outcome.weights);
  outcome.validation = gaze::evaluate(net, val_set);
  write_text(dir / "val_report.txt", gaze::render_text(outcome.validation));
  write_text(dir / "val_report.json", report_with_config(outcome.validation, cfg).dump(2) + "\n");
  out << gaze::render_text(outcome.validation) << "weights: " << outcome.weights.string() << '\n';
  return outcome;
}

gaze::EvalReport cmd_eval(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  nn::Network net = nn::load_network(cfg.weights_path());
  const fs::path dir = prepare_out(cfg);
  auto [train_set, val_set] = load_split(cfg, net_extent(net));
  (void)train_set;
  const gaze::EvalReport r = gaze::evaluate(net, val_set);
  const std::string text = gaze::render_text(r);
  write_text(dir / "report.txt", text);
  json j = report_with_config(r, cfg);
  j["weights"] = cfg.weights_path().string();
  write_text(dir / "report.json", j.dump(2) + "\n");
  out << text;
  return r;
}

BenchReport run_bench(nn::Network& net, std::size_t frames, std::uint64_t seed) {
  if (frames == 0) throw ConfigError("bench needs at least one frame");
  const std::size_t extent = net_extent(net);
  const std::size_t distinct = std::min<std::size_t>(frames, 50);
  std::vector<gaze::Frame> inputs;
  for (std::size_t i = 0; i < distinct; ++i) {
    inputs.push_back(render_frame(gaze::kAllClasses[i % gaze::kNumClasses], seed, i, extent));
  }

  BenchReport r;
  r.frames = frames;
  r.extent = extent;
  const nn::ConvAlgorithm saved = net.conv_algorithm();
  net.set_conv_algorithm(nn::ConvAlgorithm::kIm2col);
  for (std::size_t i = 0; i < std::min<std::size_t>(3, distinct); ++i) gaze::predict(net, inputs[i]);

  std::vector<double> layer_s;
  net.set_layer_timer(&layer_s);
  double slowest = 0.0;
  const auto start = Clock::now();
  for (std::size_t i = 0; i < frames; ++i) {
    const auto t0 = Clock::now();
    gaze::predict(net, inputs[i % distinct]);
    slowest = std::max(slowest, std::chrono::duration<double>(Clock::now() - t0).count());
  }
  r.total_s = std::chrono::duration<double>(Clock::now() - start).count();
  net.set_layer_timer(nullptr);
  r.mean_fps = static_cast<double>(frames) / r.total_s;
  r.min_fps = 1.0 / slowest;
  for (std::size_t i = 0; i < layer_s.size(); ++i) {
    r.layers.push_back({layer_name(net.specs()[i], i), 1e3 * layer_s[i] / static_cast<double>(frames)});
    r.layer_sum_s += layer_s[i];
  }

  r.naive_frames = std::min<std::size_t>(distinct, 10);
  r.naive_equal = true;
  for (std::size_t i = 0; i < r.naive_frames; ++i) {
    net.set_conv_algorithm(nn::ConvAlgorithm::kIm2col);
    const auto fast = gaze::predict(net, inputs[i]);
    net.set_conv_algorithm(nn::ConvAlgorithm::kDirect);
    const auto naive = gaze::predict(net, inputs[i]);
    if (fast.probabilities != naive.probabilities || fast.label != naive.label) r.naive_equal = false;
  }
  net.set_conv_algorithm(saved);
  return r;
}

std::string render_bench(const BenchReport& r) {
  char buf[200];
  std::string s;
  std::snprintf(buf, sizeof buf, "frames       %zu at %zux%zu, single stream\n", r.frames, r.extent, r.extent);
  s += buf;
  std::snprintf(buf, sizeof buf, "mean FPS     %.2f\nmin FPS      %.2f\n", r.mean_fps, r.min_fps);
  s += buf;
  s += std::string("reference    ") + kReferenceFps + "\n";
  s += "per-layer ms/frame\n";
  for (const auto& l : r.layers) {
    std::snprintf(buf, sizeof buf, "  %-18s %9.3f\n", l.name.c_str(), l.ms_per_frame);
    s += buf;
  }
  const double total_ms = 1e3 * r.total_s / static_cast<double>(r.frames);
  const double sum_ms = 1e3 * r.layer_sum_s / static_cast<double>(r.frames);
  std::snprintf(buf, sizeof buf, "  %-18s %9.3f of %.3f total (%.1f%%)\n", "layer sum", sum_ms, total_ms,
                100.0 * sum_ms / total_ms);
  s += buf;
  std::snprintf(buf, sizeof buf, "naive conv   %s on %zu frames\n", r.naive_equal ? "identical" : "DIFFERENT",
                r.naive_frames);
  s += buf;
  return s;
}

json bench_json(const BenchReport& r) {
  json layers = json::array();
  for (const auto& l : r.layers) layers.push_back({{"layer", l.name}, {"ms_per_frame", l.ms_per_frame}});
  return {{"frames", r.frames},
          {"extent", r.extent},
          {"total_s", r.total_s},
          {"mean_fps", r.mean_fps},
          {"min_fps", r.min_fps},
          {"layers", layers},
          {"layer_sum_s", r.layer_sum_s},
          {"naive_equal", r.naive_equal},
          {"naive_frames", r.naive_frames},
          {"reference", kReferenceFps}};
}

BenchReport cmd_bench(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  nn::Network net = nn::load_network(cfg.weights_path());
  const fs::path dir = prepare_out(cfg);
  const BenchReport r = run_bench(net, cfg.bench_frames, cfg.seeds.world);
  json j = bench_json(r);
  j["run_config"] = to_json(cfg);
  write_text(dir / "bench.json", j.dump(2) + "\n");
  out << render_bench(r);
  return r;
}

SimRun simulate(const sim::SimConfig& config, const sim::Scenario& scenario, nn::Network* net,
                std::uint64_t render_seed) {
  relay::Store store([] { return 0; });
  sim::StorePort port(store, scenario.outages);
  sim::VirtualClock clock;
  sim::Simulator::ClassSource classify;
  if (net != nullptr) {
    const std::size_t extent = net_extent(*net);
    classify = [net, extent, render_seed](gaze::GazeClass scripted, std::size_t index) {
      return gaze::predict(*net, render_frame(scripted, render_seed, index, extent)).label;
    };
  }
  sim::Simulator simulator(config, scenario, port, clock, std::move(classify));
  SimRun run;
  run.result = simulator.run();
  run.latency = sim::summarize_latency(run.result.latencies_us);
  run.config = config;
  return run;
}

json sim_metrics_json(const SimRun& run) {
  const auto& r = run.result;
  const auto& c = r.counters;
  json histogram = json::array();
  for (const auto& [edge, count] : run.latency.histogram) histogram.push_back({edge, count});
  const sim::BotState& f = r.final_state;
  json j = {
      {"latency_ms",
       {{"count", run.latency.count},
        {"min", run.latency.min_ms},
        {"median", run.latency.median_ms},
        {"p90", run.latency.p90_ms},
        {"max", run.latency.max_ms},
        {"bucket_ms", 20},
        {"histogram", histogram},
        {"analytic_low", run.config.poll_ms / 2.0},
        {"analytic_high", run.config.poll_ms + run.config.tick_ms + run.config.serial_delay_ms}}},
      {"counters",
       {{"polls", c.polls},
        {"failed_polls", c.failed_polls},
        {"rejected_selections", c.rejected_selections},
        {"frames_sent", c.frames_sent},
        {"frames_dropped", c.frames_dropped},
        {"frames_applied", c.frames_applied},
        {"decode_errors", c.decode_errors},
        {"failsafe_frames", c.failsafe_frames},
        {"failed_writes", c.failed_writes},
        {"superseded_emissions", c.superseded_emissions},
        {"collisions", c.collisions},
        {"telemetry_writes", c.telemetry_writes}}},
      {"final_state",
       {{"x", f.x},
        {"y", f.y},
        {"heading", f.heading},
        {"speed", f.speed},
        {"mode", std::string(sim::name_of(f.mode))}}},
      {"min_clearance_m", r.min_clearance},
      {"commands", r.command_log.size()},
      {"ticks", r.trajectory.size()}};
  j["last_diagnostic"] = r.last_diagnostic ? json(*r.last_diagnostic) : json(nullptr);
  return j;
}

SimRun cmd_run_sim(const RunConfig& cfg, const sim::Scenario& scenario, bool use_classifier, std::ostream& out) {
  cfg.validate();
  std::optional<nn::Network> net;
  if (use_classifier) net.emplace(nn::load_network(cfg.weights_path()));
  const fs::path dir = prepare_out(cfg);
  SimRun run = simulate(cfg.sim, scenario, net ? &*net : nullptr, cfg.seeds.world);
  write_sim_logs(dir, run.result, true);
  json metrics = sim_metrics_json(run);
  metrics["classifier"] = use_classifier;
  metrics["run_config"] = to_json(cfg);
  write_text(dir / "metrics.json", metrics.dump(2) + "\n");

  char buf[200];
  std::snprintf(buf, sizeof buf, "ticks %zu, commands %zu, final (%.3f, %.3f) speed %u %s\n",
                run.result.trajectory.size(), run.result.command_log.size(), run.result.final_state.x,
                run.result.final_state.y, static_cast<unsigned>(run.result.final_state.speed),
                std::string(sim::name_of(run.result.final_state.mode)).c_str());
  out << buf;
  std::snprintf(buf, sizeof buf, "latency ms: n=%zu median %.1f p90 %.1f max %.1f\n", run.latency.count,
                run.latency.median_ms, run.latency.p90_ms, run.latency.max_ms);
  out << buf;
  std::snprintf(buf, sizeof buf, "min clearance %.3f m, collisions %zu\n", run.result.min_clearance,
                run.result.counters.collisions);
  out << buf << "outputs in " << dir.string() << '\n';
  return run;
}

sim::SimResult cmd_serve(const RunConfig& cfg, const sim::Scenario& scenario, const ServeOptions& options,
                         const std::atomic<bool>& stop, std::ostream& out,
                         const std::function<void(const ServeEndpoints&)>& on_ready) {
  cfg.validate();
  const fs::path dir = prepare_out(cfg);
  relay::Store store;
  if (options.store_log) store.open_log(*options.store_log);
  relay::ServerOptions so;
  so.address = options.address;
  so.port = options.port;
  so.gateway_port = options.gateway_port;
  relay::RelayServer server(store, so);
  server.start();

  const ServeEndpoints endpoints{server.port(), server.gateway_port()};
  out << "relay listening on " << options.address << ":" << endpoints.port << '\n';
  if (endpoints.gateway_port) {
    out << "gateway listening on " << options.address << ":" << *endpoints.gateway_port << '\n';
  }
  out << std::flush;

  ClientPort port(options.address == "0.0.0.0" ? "127.0.0.1" : options.address, endpoints.port);
  sim::VirtualClock clock;
  sim::Simulator simulator(cfg.sim, scenario, port, clock);
  auto trajectory = open_out(dir / "trajectory.tsv");
  std::size_t ticks = 0;
  simulator.set_trajectory_sink(
      [&trajectory, &ticks](const std::string& line) {
        trajectory << line << '\n';
        ++ticks;
      },
      false);
  if (on_ready) on_ready(endpoints);

  const auto start = Clock::now();
  const std::int64_t limit_us = options.duration_ms ? *options.duration_ms * 1000 : -1;
  while (!stop.load()) {
    const auto elapsed_us =
        std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - start).count();
    if (limit_us >= 0 && elapsed_us >= limit_us) {
      simulator.run_until(limit_us);
      break;
    }
    simulator.run_until(elapsed_us);
    std::int64_t wait_us = 20000;
    if (auto next = simulator.next_event_us()) wait_us = std::clamp<std::int64_t>(*next - elapsed_us, 0, 20000);
    std::this_thread::sleep_for(std::chrono::microseconds(wait_us));
  }

  const sim::SimResult result = simulator.result();
  trajectory.flush();
  write_sim_logs(dir, result, false);
  SimRun run{result, sim::summarize_latency(result.latencies_us), cfg.sim};
  json metrics = sim_metrics_json(run);
  metrics["ticks"] = ticks;
  metrics["run_config"] = to_json(cfg);
  write_text(dir / "metrics.json", metrics.dump(2) + "\n");
  server.stop();
  store.flush_log();
  out << "stopped after " << clock.now_ms() << " ms; logs in " << dir.string() << '\n';
  return result;
}

}  // namespace eyedrive::harness
