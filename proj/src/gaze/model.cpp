#include "eyedrive/gaze/model.hpp"

#include <algorithm>
#include <string>

#include "eyedrive/errors.hpp"

namespace eyedrive::gaze {

std::vector<nn::LayerSpec> gaze_layers() {
  using nn::LayerSpec;
  std::vector<LayerSpec> layers;
  for (const std::size_t filters : {32, 64, 128, 128}) {
    layers.push_back(LayerSpec::conv2d(filters));
    layers.push_back(LayerSpec::relu());
    layers.push_back(LayerSpec::dropout(kDropoutRate));
    layers.push_back(LayerSpec::maxpool2x2());
  }
  layers.push_back(LayerSpec::flatten());
  layers.push_back(LayerSpec::dense(kDenseWidth));
  layers.push_back(LayerSpec::relu());
  layers.push_back(LayerSpec::dropout(kDropoutRate));
  layers.push_back(LayerSpec::dense(kNumClasses));
  layers.push_back(LayerSpec::softmax());
  return layers;
}

nn::Network build_gaze_model(std::uint64_t seed, std::size_t extent) {
  if (extent == 0 || extent % 16 != 0) {
    throw ConfigError("model input extent must be a positive multiple of 16, got " +
                      std::to_string(extent));
  }
  return nn::Network({extent, extent, 1}, gaze_layers(), seed);
}

Prediction predict(nn::Network& net, const Frame& frame) {
  const nn::Tensor& probs = net.forward(frame.tensor(), nn::Mode::kInference);
  if (probs.size() != kNumClasses) {
    throw ShapeError("network emits " + std::to_string(probs.size()) + " outputs, expected " +
                     std::to_string(kNumClasses));
  }
  Prediction p;
  std::size_t best = 0;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    p.probabilities[k] = probs[k];
    if (probs[k] > probs[best]) best = k;
  }
  p.label = class_at(best);
  return p;
}

}  // namespace eyedrive::gaze
