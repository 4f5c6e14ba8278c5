#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "eyedrive/gaze/dataset.hpp"
#include "eyedrive/gaze/report.hpp"
#include "eyedrive/gaze/train.hpp"
#include "eyedrive/harness/run_config.hpp"
#include "eyedrive/nn/network.hpp"
#include "eyedrive/sim/scenario.hpp"
#include "eyedrive/sim/simulator.hpp"

namespace eyedrive::harness {

inline constexpr const char* kReferenceFps = "15-16 FPS";

/// Writes the synthetic corpus to `data_dir` with the configured class counts.
gaze::DatasetManifest cmd_gen_data(const RunConfig& cfg, std::ostream& out);

struct TrainOutcome {
  gaze::TrainResult history;
  gaze::EvalReport validation;
  std::filesystem::path weights;
};

/// Loads `data_dir`, splits it, trains the model and writes weights,
/// checkpoints, the epoch log and the validation report under `out_dir`.
TrainOutcome cmd_train(const RunConfig& cfg, std::ostream& out);

/// Evaluates the weights on the validation split of `data_dir`.
gaze::EvalReport cmd_eval(const RunConfig& cfg, std::ostream& out);

struct LayerTime {
  std::string name;
  double ms_per_frame = 0.0;
};

struct BenchReport {
  std::size_t frames = 0;
  std::size_t extent = 0;
  double total_s = 0.0;
  double mean_fps = 0.0;
  double min_fps = 0.0;
  std::vector<LayerTime> layers;
  double layer_sum_s = 0.0;
  /// Predictions from the naive conv loops equal the im2col path bit for bit.
  bool naive_equal = false;
  std::size_t naive_frames = 0;
};

/// Single-stream predict throughput over `frames` synthetic frames.
BenchReport run_bench(nn::Network& net, std::size_t frames, std::uint64_t seed);
std::string render_bench(const BenchReport& r);
nlohmann::json bench_json(const BenchReport& r);
BenchReport cmd_bench(const RunConfig& cfg, std::ostream& out);

struct SimRun {
  sim::SimResult result;
  sim::LatencyStats latency;
  sim::SimConfig config;
};

/// Runs a scenario on the virtual clock against an in-process relay. With a
/// network, every scripted frame is rendered and classified; otherwise the
/// scripted classes feed the debouncer directly.
SimRun simulate(const sim::SimConfig& config, const sim::Scenario& scenario, nn::Network* net = nullptr,
                std::uint64_t render_seed = 0);
nlohmann::json sim_metrics_json(const SimRun& run);

/// Writes trajectory.tsv, commands.tsv, metrics.json and run_config.json to `out_dir`.
SimRun cmd_run_sim(const RunConfig& cfg, const sim::Scenario& scenario, bool use_classifier, std::ostream& out);

struct ServeOptions {
  std::string address = "127.0.0.1";
  std::uint16_t port = 7400;
  std::optional<std::uint16_t> gateway_port = 7401;
  std::optional<std::filesystem::path> store_log;
  std::optional<std::int64_t> duration_ms;  // empty runs until stopped
};

struct ServeEndpoints {
  std::uint16_t port = 0;
  std::optional<std::uint16_t> gateway_port;
};

/// Relay server, gateway and a wall-clock-paced simulation that reaches the
/// relay only through the line protocol. Returns when `stop` is set or the
/// duration elapses; logs are flushed before returning.
sim::SimResult cmd_serve(const RunConfig& cfg, const sim::Scenario& scenario, const ServeOptions& options,
                         const std::atomic<bool>& stop, std::ostream& out,
                         const std::function<void(const ServeEndpoints&)>& on_ready = {});

}  // namespace eyedrive::harness
