// Acceptance run: one PASS/FAIL line per gated criterion. Exit status is 0
// only when every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "eyedrive/control/debounce.hpp"
#include "eyedrive/errors.hpp"
#include "eyedrive/gaze/dataset.hpp"
#include "eyedrive/gaze/model.hpp"
#include "eyedrive/gaze/report.hpp"
#include "eyedrive/gaze/train.hpp"
#include "eyedrive/harness/commands.hpp"
#include "eyedrive/nn/gradient_check.hpp"
#include "eyedrive/nn/network.hpp"
#include "eyedrive/nn/ops.hpp"
#include "eyedrive/relay/client.hpp"
#include "eyedrive/relay/select.hpp"
#include "eyedrive/relay/server.hpp"
#include "eyedrive/relay/store.hpp"
#include "eyedrive/rng.hpp"
#include "eyedrive/sim/ultrasonic.hpp"
#include "oracles.hpp"
#include "reference_tables.hpp"
#include "sim_scenarios.hpp"

using namespace eyedrive;
using gaze::GazeClass;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Options {
  bool full = false;
  std::size_t full_epochs = 5;
  std::size_t reduced_epochs = 10;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Classifier trained on the synthetic corpus, evaluated on the held-out split.
Outcome confusion_matrix(const Options& opt) {
  const std::size_t images = opt.full ? 13233 : 2000;
  const std::size_t extent = opt.full ? 128 : 32;
  const std::size_t epochs = opt.full ? opt.full_epochs : opt.reduced_epochs;
  const double budget_s = opt.full ? 3600.0 : 300.0;
  const double min_accuracy = opt.full ? 0.99 : 0.95;
  const harness::RunConfig cfg;

  const auto t0 = Clock::now();
  auto [train_set, val_set] = [&] {
    const gaze::LabeledSet all = gaze::generate_corpus(gaze::scaled_counts(images), cfg.seeds.corpus, {}, extent);
    return gaze::split(all, cfg.val_fraction, cfg.seeds.split);
  }();
  nn::Network net = gaze::build_gaze_model(cfg.seeds.net, extent);
  gaze::TrainOptions options;
  options.epochs = epochs;
  options.batch_size = cfg.batch_size;
  options.seed = cfg.seeds.train;
  options.adam.learning_rate = cfg.learning_rate;
  if (opt.full) {
    options.on_epoch = [](const gaze::EpochStats& s) {
      std::cerr << fmt("  epoch %zu loss %.5f train accuracy %.4f (%.0f s)\n", s.epoch, s.mean_loss,
                       s.train_accuracy, s.seconds);
    };
  }
  try {
    gaze::train(net, train_set, options);
  } catch (const NumericError& e) {
    return {false, std::string("non-finite value during training: ") + e.what()};
  }
  const gaze::EvalReport r = gaze::evaluate(net, val_set);
  const double elapsed = seconds_since(t0);

  const double min_recall = *std::min_element(r.recall.begin(), r.recall.end());
  bool pass = r.accuracy >= min_accuracy && elapsed <= budget_s;
  if (opt.full) pass = pass && min_recall >= 0.98;
  std::string detail = fmt("%s: %zu images at %zux%zu, %zu epochs, val accuracy %.4f (>= %.2f), min recall %.4f%s, "
                           "%.0f s (<= %.0f s)",
                           opt.full ? "full corpus" : "reduced preset", images, extent, extent, epochs, r.accuracy,
                           min_accuracy, min_recall, opt.full ? " (>= 0.98)" : "", elapsed, budget_s);
  return {pass, detail};
}

Outcome report_math(const Options&) {
  const gaze::EvalReport r = gaze::report_from_confusion(reference::confusion());
  std::size_t matched = 0;
  std::string mismatch;
  for (const auto& row : reference::kReport) {
    const std::size_t k = gaze::index_of(row.cls);
    const bool ok = gaze::format_metric(r.precision[k]) == row.precision &&
                    gaze::format_metric(r.recall[k]) == row.recall && gaze::format_metric(r.f1[k]) == row.f1 &&
                    r.support[k] == row.support;
    if (ok) {
      ++matched;
    } else if (mismatch.empty()) {
      mismatch = std::string(", first mismatch ") + std::string(gaze::name_of(row.cls));
    }
  }
  const std::string up_recall = gaze::format_metric(r.recall[gaze::index_of(GazeClass::kUp)]);
  const bool pass = matched == reference::kReport.size() && up_recall == "0.99";
  return {pass, fmt("%zu/5 rows exact after 2-decimal rounding, Up recall 714/718 -> %s%s", matched,
                    up_recall.c_str(), mismatch.c_str())};
}

template <typename T>
nn::BasicTensor<T> random_input(nn::Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  nn::BasicTensor<T> t(std::move(shape));
  for (T& v : t.values()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// Distinct values spaced 0.01 apart, so a finite-difference nudge never flips a max or a ReLU sign.
nn::BasicTensor<double> spaced_input(nn::Shape shape, std::uint64_t seed) {
  nn::BasicTensor<double> t(std::move(shape));
  std::vector<double> vals(t.size());
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = 0.01 * (static_cast<double>(i) + 0.5) - 0.005 * vals.size();
  Rng rng(seed);
  rng.shuffle(vals.begin(), vals.end());
  std::copy(vals.begin(), vals.end(), t.data());
  return t;
}

std::vector<float> as_vector(const nn::Tensor& t) { return {t.values().begin(), t.values().end()}; }

oracle::Image as_image(const nn::Tensor& t) { return {t.extent(0), t.extent(1), t.extent(2), as_vector(t)}; }

Outcome numerical_core(const Options&) {
  using nn::LayerSpec;
  struct Case {
    const char* name;
    nn::BasicNetwork<double> net;
    nn::BasicTensor<double> input;
  };
  std::vector<Case> cases;
  cases.push_back({"Conv2D", {{6, 5, 2}, {LayerSpec::conv2d(3)}, 5}, random_input<double>({6, 5, 2}, 9)});
  cases.push_back({"ReLU", {{4, 4, 3}, {LayerSpec::relu()}, 5}, spaced_input({4, 4, 3}, 2)});
  cases.push_back({"MaxPool2x2", {{6, 4, 2}, {LayerSpec::maxpool2x2()}, 5}, spaced_input({6, 4, 2}, 3)});
  cases.push_back({"Dropout", {{5, 5, 2}, {LayerSpec::dropout(0.4)}, 5}, random_input<double>({5, 5, 2}, 4)});
  cases.push_back({"Flatten", {{3, 2, 2}, {LayerSpec::flatten()}, 5}, random_input<double>({3, 2, 2}, 4)});
  cases.push_back({"Dense", {{7}, {LayerSpec::dense(4)}, 5}, random_input<double>({7}, 4)});
  cases.push_back({"Softmax",
                   {{5}, {LayerSpec::dense(5), LayerSpec::softmax(), LayerSpec::dense(3)}, 5},
                   random_input<double>({5}, 4)});

  double worst = 0.0;
  std::string worst_at;
  bool pass = true;
  for (auto& c : cases) {
    nn::GradientCheckOptions opts;
    opts.samples_per_tensor = 0;
    opts.include_input = true;
    const auto r = nn::gradient_check(c.net, c.input, opts);
    if (r.max_relative_error >= 1e-4 || r.checked == 0) pass = false;
    if (r.max_relative_error > worst) {
      worst = r.max_relative_error;
      worst_at = c.name;
    }
  }
  const std::vector<LayerSpec> blocks = {
      LayerSpec::conv2d(8),    LayerSpec::relu(),     LayerSpec::dropout(0.4), LayerSpec::maxpool2x2(),
      LayerSpec::conv2d(16),   LayerSpec::relu(),     LayerSpec::dropout(0.4), LayerSpec::maxpool2x2(),
      LayerSpec::flatten(),    LayerSpec::dense(32),  LayerSpec::relu(),       LayerSpec::dropout(0.4),
      LayerSpec::dense(5),     LayerSpec::softmax()};
  double composite = 0.0;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    nn::BasicNetwork<double> net({16, 16, 1}, blocks, seed);
    nn::GradientCheckOptions opts;
    opts.samples_per_tensor = 40;
    opts.seed = seed;
    opts.target = seed % 5;
    const auto r = nn::gradient_check(net, random_input<double>({16, 16, 1}, seed + 100, 0.0, 1.0), opts);
    composite = std::max(composite, r.max_relative_error);
    if (r.max_relative_error >= 1e-4 || r.checked < 120) pass = false;
  }

  std::size_t equal = 0;
  const std::size_t seeds = 120;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    Rng rng(seed);
    auto random = [&rng](nn::Shape s) {
      nn::Tensor t(std::move(s));
      for (float& v : t.values()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
      return t;
    };
    const std::size_t h = 8 + 2 * rng.below(5), w = 8 + 2 * rng.below(5);
    const std::size_t ch = 1 + rng.below(5), f = 1 + rng.below(20);
    const nn::Tensor in = random({h, w, ch});
    const nn::Tensor weights = random({3, 3, ch, f});
    const nn::Tensor bias = random({f});
    const auto expected = oracle::conv3x3(as_image(in), as_vector(weights), as_vector(bias), f);
    bool ok = as_vector(nn::conv2d_forward(in, weights, bias, nn::ConvAlgorithm::kIm2col)) == expected &&
              as_vector(nn::conv2d_forward(in, weights, bias, nn::ConvAlgorithm::kDirect)) == expected &&
              as_vector(nn::maxpool2x2(in).output) == oracle::maxpool(as_image(in));
    const std::size_t units = 1 + rng.below(40);
    const nn::Tensor dw = random({in.size(), units});
    const nn::Tensor db = random({units});
    ok = ok && as_vector(nn::dense_forward(in, dw, db)) == oracle::dense(as_vector(in), as_vector(dw), as_vector(db));
    if (ok) ++equal;
  }
  pass = pass && equal == seeds;
  return {pass, fmt("gradient rel. error max %.2e (%s) over 7 layer kinds, 2-block 16x16 composite %.2e (< 1e-4); "
                    "conv/pool/dense equal naive loops on %zu/%zu seeds",
                    worst, worst_at.c_str(), composite, equal, seeds)};
}

std::vector<GazeClass> random_stream(Rng& rng, std::size_t max_run) {
  std::vector<GazeClass> s;
  const std::size_t runs = 1 + rng.below(12);
  for (std::size_t r = 0; r < runs; ++r) {
    const GazeClass c = gaze::class_at(rng.below(5));
    s.insert(s.end(), 1 + rng.below(max_run), c);
  }
  return s;
}

Outcome debounce_properties(const Options&) {
  Rng rng(0xdeb0);
  std::size_t violations = 0, emissions = 0;
  const std::size_t streams = 10000;
  for (std::size_t trial = 0; trial < streams; ++trial) {
    const std::size_t n = 1 + rng.below(40);
    const auto stream = random_stream(rng, 2 * n);
    control::Debouncer d(n);
    for (std::size_t i = 0; i < stream.size(); ++i) {
      const auto out = d.push(stream[i]);
      if (!out) continue;
      ++emissions;
      bool run_ok = i + 1 >= n && *out == control::map_class(stream[i]);
      for (std::size_t j = i + 1 >= n ? i + 1 - n : 0; run_ok && j <= i; ++j) run_ok = stream[j] == stream[i];
      if (!run_ok) ++violations;
    }
  }

  control::Debouncer blink(control::kBlinkPresetFrames);
  std::size_t stops = 0;
  for (int i = 0; i < 25; ++i) blink.push(GazeClass::kStraight);
  for (int rep = 0; rep < 200; ++rep) {
    for (int i = 0; i < 19; ++i) stops += blink.push(GazeClass::kDown) == Command::kStop;
    stops += blink.push(GazeClass::kStraight) == Command::kStop;
  }
  return {violations == 0 && stops == 0 && emissions > 0,
          fmt("%zu streams, %zu emissions, %zu without n identical classes; blink preset n=20 with 19-frame Down "
              "bursts x200: %zu Stop emissions",
              streams, emissions, violations, stops)};
}

Outcome relay_protocol(const Options&) {
  relay::Store store;
  relay::RelayServer server(store, {});
  server.start();
  auto client = [&] { return relay::TcpClient("127.0.0.1", server.port()); };
  std::vector<std::string> failures;

  // Read-your-write and per-key seq on one connection.
  {
    auto c = client();
    Rng rng(17);
    std::map<std::string, std::uint64_t> seq;
    std::size_t ryw_fail = 0, seq_fail = 0;
    for (int i = 0; i < 500; ++i) {
      const std::string key = "k" + std::to_string(rng.below(8));
      const std::string value = "v" + std::to_string(i);
      const auto s = c.set(key, value);
      if (s != seq[key] + 1) ++seq_fail;
      seq[key] = s;
      const auto got = c.get(key);
      if (!got || got->value != value || got->seq != s) ++ryw_fail;
    }
    if (ryw_fail) failures.push_back(std::to_string(ryw_fail) + " read-your-write misses");
    if (seq_fail) failures.push_back(std::to_string(seq_fail) + " seq gaps");
  }

  // Three writers interleaved by script, two subscribers.
  std::uint64_t n = 0;
  {
    auto sub_a = client();
    auto sub_b = client();
    sub_a.subscribe("Signals");
    sub_b.subscribe("Signals");
    std::vector<relay::TcpClient> writers;
    for (int i = 0; i < 3; ++i) writers.push_back(client());
    Rng rng(33);
    std::map<std::uint64_t, std::string> acked;
    std::vector<std::uint64_t> last(3, 0);
    std::size_t order_fail = 0;
    for (int step = 0; step < 300; ++step) {
      const std::size_t w = rng.below(3);
      const std::string v = "Forward#" + std::to_string(step);
      const auto s = writers[w].set("Signals", v);
      if (!acked.emplace(s, v).second || s <= last[w]) ++order_fail;
      last[w] = s;
    }
    n = acked.size();
    if (acked.rbegin()->first != n) ++order_fail;
    for (auto* sub : {&sub_a, &sub_b}) {
      for (std::uint64_t i = 1; i <= n; ++i) {
        const auto ev = sub->next_event(std::chrono::seconds(5));
        if (!ev || ev->seq != i || ev->value != acked[i]) {
          ++order_fail;
          break;
        }
      }
      if (sub->next_event(std::chrono::milliseconds(50))) ++order_fail;
    }
    if (order_fail) failures.push_back(std::to_string(order_fail) + " interleaving order faults");
  }
  server.stop();

  // Garbage in the command keys never yields a moving command.
  const std::vector<std::string> names = {"Stop", "Left", "Right", "Start", "Forward"};
  Rng rng(0xf022);
  auto garbage = [&]() -> std::string {
    switch (rng.below(5)) {
      case 0: return "";
      case 1: {
        std::string s(1 + rng.below(12), ' ');
        for (char& ch : s) ch = static_cast<char>(rng.below(256));
        return s;
      }
      case 2: {
        std::string s = names[rng.below(names.size())];
        const auto pos = rng.below(s.size());
        s[pos] = static_cast<char>(s[pos] ^ 0x20);
        return s;
      }
      case 3: return names[rng.below(names.size())] + " ";
      default: return std::to_string(static_cast<int>(rng.below(9)));
    }
  };
  std::size_t moved = 0;
  const std::size_t trials = 10000;
  for (std::size_t t = 0; t < trials; ++t) {
    // The active source holds garbage; the other keys hold anything.
    const bool manual = rng.below(2) == 0;
    std::map<std::string, std::optional<std::string>, std::less<>> kv;
    kv["Override"] = manual ? std::optional<std::string>("1") : std::optional<std::string>(garbage());
    kv["Signals"] = manual ? std::optional(names[rng.below(5)]) : std::optional(garbage());
    kv["ManualSignal"] = garbage();
    kv["Speed"] = rng.below(2) == 0 ? std::optional(garbage()) : std::optional<std::string>("200");
    const auto sel = relay::select_command([&](std::string_view k) { return kv.find(k)->second; });
    if (is_moving(sel.command)) ++moved;
  }
  if (moved) failures.push_back(std::to_string(moved) + " garbage selections moved");

  std::string detail = fmt("500 set/get pairs, 3-writer interleaving of %llu writes seen gap-free by 2 subscribers, "
                           "%zu fuzzed garbage selections: %zu moving",
                           static_cast<unsigned long long>(n), trials, moved);
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty(), detail};
}

sim::Scenario latency_scenario() {
  sim::Scenario sc;
  sc.gaze.push_back({GazeClass::kUp, 40});
  Rng rng(0x1a7);
  GazeClass prev = GazeClass::kUp;
  for (int i = 0; i < 120; ++i) {
    GazeClass c;
    do {
      c = gaze::class_at(rng.below(5));
    } while (c == prev || c == GazeClass::kDown || c == GazeClass::kUp);
    sc.gaze.push_back({c, 30 + rng.below(15)});
    prev = c;
  }
  sc.gaze.push_back({GazeClass::kDown, 30});
  return sc;
}

Outcome latency(const Options&) {
  const sim::Scenario sc = latency_scenario();
  const sim::SimConfig cfg;
  const auto a = harness::simulate(cfg, sc);
  const auto b = harness::simulate(cfg, sc);
  const bool same = a.result.latencies_us == b.result.latencies_us && a.result.trajectory == b.result.trajectory &&
                    a.result.command_log.size() == b.result.command_log.size();
  const auto& s = a.latency;
  const bool pass = s.count > 0 && s.median_ms >= 100.0 && s.median_ms <= 600.0 && same;
  return {pass, fmt("%zu emissions, median %.1f ms in [100, 600], min %.1f, p90 %.1f, max %.1f; reference delay about "
                    "500 ms; repeat run %s",
                    s.count, s.median_ms, s.min_ms, s.p90_ms, s.max_ms, same ? "identical" : "DIFFERS")};
}

Outcome safety(const Options&) {
  const sim::SimConfig cfg;
  const std::size_t scenarios = 1000;
  std::size_t bad = 0;
  double worst = 1e9;
  std::string first;
  for (std::size_t i = 0; i < scenarios; ++i) {
    const auto v = testing::check_safety(testing::random_obstacle_scenario(derive_seed(31337, i)), cfg);
    worst = std::min(worst, v.min_clearance);
    if (!v.clearance_ok || !v.stop_ok) {
      ++bad;
      if (first.empty()) first = "; first failure scenario " + std::to_string(i) + ": " + v.detail;
    }
  }
  const double bound = cfg.threshold_cm / 100.0 - cfg.v_max * cfg.tick_ms / 1000.0;
  return {bad == 0, fmt("%zu randomized scenarios, %zu violations, closest approach %.3f m (bound %.3f m), every Stop "
                        "zeroed speed within its tick%s",
                        scenarios, bad, worst, bound, first.c_str())};
}

Outcome throughput(const Options&) {
  nn::Network net = gaze::build_gaze_model(3, 128);
  net.set_conv_algorithm(nn::ConvAlgorithm::kIm2col);
  const harness::BenchReport r = harness::run_bench(net, 500, 5);
  return {r.mean_fps >= 8.0, fmt("mean %.1f FPS, min %.1f FPS over %zu frames at 128x128 (floor 8 FPS, reference "
                                 "target %s); layer times sum to %.1f%% of total; naive conv %s",
                                 r.mean_fps, r.min_fps, r.frames, harness::kReferenceFps,
                                 100.0 * r.layer_sum_s / r.total_s, r.naive_equal ? "identical" : "DIFFERS")};
}

Outcome ultrasonic(const Options&) {
  double worst = 0.0;
  std::size_t points = 0;
  for (int tenth_mm = 100; tenth_mm <= 40000; ++tenth_mm) {
    const double cm = tenth_mm / 100.0;
    const double back = sim::distance_cm_for_echo(sim::echo_for_distance(cm / 100.0));
    worst = std::max(worst, std::abs(back - cm));
    ++points;
  }
  sim::World empty;
  empty.bounds = {{-100, -100}, {100, 100}};
  const auto none = sim::ultrasonic_measure(empty, {0, 0}, 0.0, {});
  const auto timing = sim::ping_timing(none, 0);
  const bool timeout_ok = none.timeout() && none.echo_width_us() == sim::kEchoTimeoutUs &&
                          sim::kEchoTimeoutUs == 38000 && timing.echo_end_us - timing.echo_start_us == 38000;
  return {worst <= 0.1 && timeout_ok,
          fmt("distance->echo->distance over %zu points from 1 cm to 4 m: worst error %.4f cm (<= 0.1); no echo "
              "reads TIMEOUT with a %lld us pulse",
              points, worst, static_cast<long long>(timing.echo_end_us - timing.echo_start_us))};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  Options opt;
  std::vector<std::string> only;
  app.add_flag("--full", opt.full, "Train on the full 128x128 corpus instead of the reduced preset");
  app.add_option("--full-epochs", opt.full_epochs, "Epochs for the full run")->check(CLI::Range(5, 100));
  app.add_option("--only", only, "Run only these criteria (by id)");
  CLI11_PARSE(app, argc, argv);

  struct Criterion {
    const char* id;
    std::function<Outcome(const Options&)> run;
  };
  const std::vector<Criterion> criteria = {
      {"confusion-matrix", confusion_matrix}, {"report-math", report_math}, {"numerical-core", numerical_core},
      {"debounce", debounce_properties},      {"relay-protocol", relay_protocol}, {"latency", latency},
      {"safety", safety},                     {"throughput", throughput},         {"ultrasonic", ultrasonic},
  };
  const std::set<std::string> selected(only.begin(), only.end());
  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run(opt);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.id << ": " << o.detail << fmt(" [%.1f s]", seconds_since(t0))
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
