#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "eyedrive/gaze/gaze_class.hpp"
#include "eyedrive/gaze/image.hpp"
#include "eyedrive/nn/network.hpp"

namespace eyedrive::gaze {

inline constexpr double kDropoutRate = 0.4;
inline constexpr std::size_t kDenseWidth = 256;

/// Four blocks of Conv3x3 (32/64/128/128), ReLU, Dropout, MaxPool, then
/// Flatten, Dense 256, ReLU, Dropout, Dense 5, Softmax.
std::vector<nn::LayerSpec> gaze_layers();

/// The layer list above on an `extent` x `extent` x 1 input. The extent must
/// be a positive multiple of 16 (ConfigError otherwise); 128 gives Flatten(8192).
nn::Network build_gaze_model(std::uint64_t seed, std::size_t extent = kFrameExtent);

struct Prediction {
  GazeClass label = GazeClass::kStraight;
  std::array<double, kNumClasses> probabilities{};
};

/// Inference-mode forward. Throws ShapeError if the frame does not fit the network.
Prediction predict(nn::Network& net, const Frame& frame);

}  // namespace eyedrive::gaze
