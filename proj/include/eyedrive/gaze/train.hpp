#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "eyedrive/gaze/dataset.hpp"
#include "eyedrive/nn/adam.hpp"
#include "eyedrive/nn/network.hpp"

namespace eyedrive::gaze {

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double train_accuracy = 0.0;  // on the dropout-active forward passes
  double seconds = 0.0;
};

struct TrainOptions {
  std::size_t epochs = 25;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;  // shuffling order
  nn::AdamConfig adam;
  /// Empty disables checkpoints; otherwise `epoch-<n>.gznn` is written after every epoch.
  std::filesystem::path checkpoint_dir;
  std::function<void(const EpochStats&)> on_epoch;
};

struct TrainResult {
  std::vector<double> loss_history;  // mean loss per epoch
  std::vector<EpochStats> epochs;
};

/// Mini-batch Adam on categorical cross-entropy with a class-stratified
/// shuffle each epoch. Throws InputError for an empty set, ShapeError if the
/// frames do not fit the network, and NumericError on a non-finite loss,
/// activation or weight.
TrainResult train(nn::Network& net, const LabeledSet& set, const TrainOptions& options);

/// Epoch visiting order: each class's samples are shuffled and then spread
/// evenly over the epoch, so every batch sees roughly the class mix of the set.
std::vector<std::size_t> stratified_order(const LabeledSet& set, std::uint64_t seed,
                                          std::size_t epoch);

}  // namespace eyedrive::gaze
