#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "eyedrive/sim/config.hpp"
#include "json.hpp"

namespace eyedrive::harness {

struct Seeds {
  std::uint64_t corpus = 1;
  std::uint64_t split = 2;
  std::uint64_t net = 3;
  std::uint64_t train = 4;
  std::uint64_t world = 5;
};

/// Every parameter a subcommand reads. Serialized into each run's outputs so
/// the run can be repeated from that file alone.
struct RunConfig {
  Seeds seeds;
  std::size_t images = 13233;  // scaled to the reference class distribution
  std::size_t extent = 128;
  double val_fraction = 0.3;
  std::size_t epochs = 25;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::size_t bench_frames = 500;
  sim::SimConfig sim;
  std::string data_dir = "data";
  std::string weights;  // empty means <out_dir>/weights.gznn
  std::string out_dir = "out";

  /// Sets every seed from one base value: corpus = base, split = base + 1, ...
  void reseed(std::uint64_t base);
  std::filesystem::path weights_path() const;
  /// Throws ConfigError naming the first field outside its range.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& c);
/// Applies a partial config. Unknown keys and wrong types are ConfigError.
void apply_json(RunConfig& c, const nlohmann::json& j);
/// Sets one field by dotted name, e.g. `sim.poll_ms` or `seeds.net`.
void set_field(RunConfig& c, std::string_view name, std::string_view text);
/// Reads a YAML (or JSON) config file on top of `base`.
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});
/// Writes `<dir>/run_config.json`.
void write_run_config(const RunConfig& c, const std::filesystem::path& dir);

/// Dotted-name overrides collected from the command line, applied last.
using Overrides = std::vector<std::pair<std::string, std::string>>;
void apply_overrides(RunConfig& c, const Overrides& overrides);

}  // namespace eyedrive::harness
