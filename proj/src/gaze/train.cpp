#include "eyedrive/gaze/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "eyedrive/errors.hpp"
#include "eyedrive/nn/ops.hpp"
#include "eyedrive/nn/weights_io.hpp"
#include "eyedrive/rng.hpp"

namespace eyedrive::gaze {

std::vector<std::size_t> stratified_order(const LabeledSet& set, std::uint64_t seed,
                                          std::size_t epoch) {
  Rng rng(derive_seed(seed, epoch));
  std::array<std::vector<std::size_t>, kNumClasses> members;
  for (std::size_t i = 0; i < set.size(); ++i) members[index_of(set.labels[i])].push_back(i);

  struct Slot {
    double key;
    std::size_t index;
  };
  std::vector<Slot> slots;
  slots.reserve(set.size());
  for (auto& m : members) {
    rng.shuffle(m.begin(), m.end());
    const auto n = static_cast<double>(m.size());
    for (std::size_t j = 0; j < m.size(); ++j) {
      slots.push_back({(static_cast<double>(j) + rng.uniform01()) / n, m[j]});
    }
  }
  std::stable_sort(slots.begin(), slots.end(),
                   [](const Slot& a, const Slot& b) { return a.key < b.key; });
  std::vector<std::size_t> order(slots.size());
  std::transform(slots.begin(), slots.end(), order.begin(), [](const Slot& s) { return s.index; });
  return order;
}

namespace {

void check_weights(const nn::Network& net, std::size_t epoch) {
  for (const auto* p : net.parameters()) {
    if (!p->value.all_finite()) {
      throw NumericError("non-finite weight after epoch " + std::to_string(epoch));
    }
  }
}

}  // namespace

TrainResult train(nn::Network& net, const LabeledSet& set, const TrainOptions& options) {
  if (set.empty()) throw InputError("training set is empty");
  if (options.batch_size == 0) throw ConfigError("batch size must be positive");
  set.validate();
  if (set.frames.front().tensor().shape() != net.input_shape()) {
    throw ShapeError("frames are " + nn::shape_to_string(set.frames.front().tensor().shape()) +
                     " but the network expects " + nn::shape_to_string(net.input_shape()));
  }
  if (!options.checkpoint_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(options.checkpoint_dir, ec);
    if (ec) throw IoError("cannot create " + options.checkpoint_dir.string());
  }

  net.set_finite_checks(true);
  const auto params = net.parameters();
  nn::AdamState<float> adam(params, options.adam);
  TrainResult result;

  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const std::vector<std::size_t> order = stratified_order(set, options.seed, epoch);
    double loss_sum = 0.0;
    std::size_t correct = 0;

    for (std::size_t b = 0; b < order.size(); b += options.batch_size) {
      const std::size_t end = std::min(order.size(), b + options.batch_size);
      const double scale = 1.0 / static_cast<double>(end - b);
      net.zero_grad();
      for (std::size_t s = b; s < end; ++s) {
        const std::size_t i = order[s];
        const std::size_t target = index_of(set.labels[i]);
        const nn::Tensor& probs = net.forward(set.frames[i].tensor(), nn::Mode::kTraining);
        const double loss = nn::cross_entropy(probs, target);
        if (!std::isfinite(loss)) {
          throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", sample " +
                             std::to_string(set.source_index[i]));
        }
        loss_sum += loss;
        const auto best = std::max_element(probs.values().begin(), probs.values().end());
        if (static_cast<std::size_t>(best - probs.values().begin()) == target) ++correct;
        net.backward_cross_entropy(target, scale);
      }
      nn::adam_step(adam, params);
    }
    check_weights(net, epoch);

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = loss_sum / static_cast<double>(order.size());
    stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    stats.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.loss_history.push_back(stats.mean_loss);
    result.epochs.push_back(stats);
    if (!options.checkpoint_dir.empty()) {
      nn::save_network(net, options.checkpoint_dir / ("epoch-" + std::to_string(epoch) + ".gznn"));
    }
    if (options.on_epoch) options.on_epoch(stats);
  }
  net.set_finite_checks(false);
  return result;
}

}  // namespace eyedrive::gaze
