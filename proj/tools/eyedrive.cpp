#include <atomic>
#include <csignal>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "eyedrive/errors.hpp"
#include "eyedrive/harness/commands.hpp"

namespace {

using namespace eyedrive;
using harness::Overrides;
using harness::RunConfig;

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

struct Common {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::vector<std::string> sets;
  Overrides overrides;
};

void add_common(CLI::App* cmd, Common& c, const std::string& out_key) {
  cmd->add_option("--seed", c.seed, "Base seed; corpus, split, net, train and world seeds derive from it");
  cmd->add_option("--config", c.config, "YAML or JSON run config")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.sets, "Override any config field, e.g. --set sim.poll_ms=100");
  cmd->add_option_function<std::string>(
      "--out", [&c, out_key](const std::string& v) { c.overrides.emplace_back(out_key, v); },
      "Output directory");
}

// Adds a flag that maps onto one dotted config field.
template <typename T>
void add_field(CLI::App* cmd, Common& c, const std::string& flag, const std::string& key, const std::string& help) {
  cmd->add_option_function<T>(
      flag, [&c, key](const T& v) { c.overrides.emplace_back(key, CLI::detail::to_string(v)); }, help);
}

RunConfig resolve(const Common& c, const sim::Scenario* scenario) {
  RunConfig cfg;
  if (!c.config.empty()) cfg = harness::load_run_config(c.config);
  if (scenario != nullptr) cfg.sim = scenario->configure(cfg.sim);
  if (c.seed) cfg.reseed(*c.seed);
  harness::apply_overrides(cfg, c.overrides);
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    harness::set_field(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

std::string one_line(std::string s) {
  for (char& ch : s) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  return s;
}

int fail(const char* category, const std::exception& e) {
  std::cerr << "error: " << category << ": " << one_line(e.what()) << std::endl;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaze-controlled wheelchair pipeline: data, training, evaluation, benchmark and simulation"};
  app.require_subcommand(1);

  Common gen_c, train_c, eval_c, bench_c, sim_c, serve_c;

  auto* gen = app.add_subcommand("gen-data", "Render the synthetic eye corpus");
  add_common(gen, gen_c, "paths.data");
  add_field<std::size_t>(gen, gen_c, "--images", "data.images", "Corpus size, split by the reference class ratios");

  auto* train = app.add_subcommand("train", "Train the classifier and write weights");
  add_common(train, train_c, "paths.out");
  add_field<std::string>(train, train_c, "--data", "paths.data", "Dataset directory");
  add_field<std::string>(train, train_c, "--weights", "paths.weights", "Weights file to write");
  add_field<std::size_t>(train, train_c, "--epochs", "train.epochs", "Training epochs");
  add_field<std::size_t>(train, train_c, "--batch", "train.batch_size", "Mini-batch size");
  add_field<double>(train, train_c, "--lr", "train.learning_rate", "Adam learning rate");
  add_field<std::size_t>(train, train_c, "--extent", "data.extent", "Input side length in pixels");

  auto* eval = app.add_subcommand("eval", "Confusion matrix and classification report on the validation split");
  add_common(eval, eval_c, "paths.out");
  add_field<std::string>(eval, eval_c, "--data", "paths.data", "Dataset directory");
  add_field<std::string>(eval, eval_c, "--weights", "paths.weights", "Weights file");

  auto* bench = app.add_subcommand("bench", "Single-stream predict throughput");
  add_common(bench, bench_c, "paths.out");
  add_field<std::string>(bench, bench_c, "--weights", "paths.weights", "Weights file");
  add_field<std::size_t>(bench, bench_c, "--frames", "bench.frames", "Frames to time (at least 500)");

  std::string sim_scenario;
  bool sim_classifier = false;
  auto* run_sim = app.add_subcommand("run-sim", "Run a scenario on the virtual clock");
  add_common(run_sim, sim_c, "paths.out");
  run_sim->add_option("--scenario", sim_scenario, "Scenario YAML file")->required()->check(CLI::ExistingFile);
  run_sim->add_flag("--classifier", sim_classifier, "Render and classify every scripted frame");
  add_field<std::string>(run_sim, sim_c, "--weights", "paths.weights", "Weights for --classifier");
  add_field<int>(run_sim, sim_c, "--debounce", "sim.debounce_frames", "Consecutive frames before a command");

  std::string listen = "127.0.0.1:7400";
  int gateway_port = 7401;
  std::string store_log;
  std::string serve_scenario;
  std::optional<std::int64_t> duration_ms;
  auto* serve = app.add_subcommand("serve", "Relay server, gateway and a live simulation");
  add_common(serve, serve_c, "paths.out");
  serve->add_option("--listen", listen, "Relay address:port (port 0 picks a free one)");
  serve->add_option("--gateway-port", gateway_port, "WebSocket gateway port, -1 disables")
      ->check(CLI::Range(-1, 65535));
  serve->add_option("--log", store_log, "Append every relay write to this JSON-lines file");
  serve->add_option("--scenario", serve_scenario, "World and scripted inputs")->check(CLI::ExistingFile);
  serve->add_option("--duration-ms", duration_ms, "Stop after this much wall time")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: usage: " << one_line(e.what()) << std::endl;
    return 2;
  }

  try {
    if (*gen) {
      harness::cmd_gen_data(resolve(gen_c, nullptr), std::cout);
    } else if (*train) {
      harness::cmd_train(resolve(train_c, nullptr), std::cout);
    } else if (*eval) {
      harness::cmd_eval(resolve(eval_c, nullptr), std::cout);
    } else if (*bench) {
      harness::cmd_bench(resolve(bench_c, nullptr), std::cout);
    } else if (*run_sim) {
      const sim::Scenario sc = sim::load_scenario(sim_scenario);
      harness::cmd_run_sim(resolve(sim_c, &sc), sc, sim_classifier, std::cout);
    } else if (*serve) {
      const sim::Scenario sc = serve_scenario.empty() ? sim::Scenario{} : sim::load_scenario(serve_scenario);
      const RunConfig cfg = resolve(serve_c, &sc);
      harness::ServeOptions opts;
      const auto colon = listen.rfind(':');
      if (colon == std::string::npos) throw ConfigError("--listen expects address:port, got '" + listen + "'");
      opts.address = listen.substr(0, colon);
      const int port = std::stoi(listen.substr(colon + 1));
      if (port < 0 || port > 65535) throw ConfigError("port out of range in --listen");
      opts.port = static_cast<std::uint16_t>(port);
      if (gateway_port >= 0) {
        opts.gateway_port = static_cast<std::uint16_t>(gateway_port);
      } else {
        opts.gateway_port.reset();
      }
      if (!store_log.empty()) opts.store_log = store_log;
      opts.duration_ms = duration_ms;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      harness::cmd_serve(cfg, sc, opts, g_stop, std::cout);
    }
  } catch (const ConfigError& e) {
    return fail("config", e);
  } catch (const IoError& e) {
    return fail("io", e);
  } catch (const InputError& e) {
    return fail("input", e);
  } catch (const ShapeError& e) {
    return fail("shape", e);
  } catch (const NumericError& e) {
    return fail("numeric", e);
  } catch (const StateError& e) {
    return fail("state", e);
  } catch (const std::invalid_argument& e) {
    return fail("usage", e);
  } catch (const std::exception& e) {
    return fail("internal", e);
  }
  return 0;
}
