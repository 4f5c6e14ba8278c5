#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "eyedrive/nn/ops.hpp"
#include "eyedrive/nn/tensor.hpp"
#include "eyedrive/rng.hpp"

namespace eyedrive::nn {

/// Tag values double as the kind byte in weight files.
enum class LayerKind : std::uint8_t {
  kConv2D = 1,
  kReLU = 2,
  kMaxPool2x2 = 3,
  kDropout = 4,
  kFlatten = 5,
  kDense = 6,
  kSoftmax = 7,
};

std::string to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::kReLU;
  std::size_t units = 0;  // filters for Conv2D, outputs for Dense
  double rate = 0.0;      // Dropout only

  static LayerSpec conv2d(std::size_t filters) { return {LayerKind::kConv2D, filters, 0.0}; }
  static LayerSpec relu() { return {LayerKind::kReLU, 0, 0.0}; }
  static LayerSpec maxpool2x2() { return {LayerKind::kMaxPool2x2, 0, 0.0}; }
  static LayerSpec dropout(double rate) { return {LayerKind::kDropout, 0, rate}; }
  static LayerSpec flatten() { return {LayerKind::kFlatten, 0, 0.0}; }
  static LayerSpec dense(std::size_t units) { return {LayerKind::kDense, units, 0.0}; }
  static LayerSpec softmax() { return {LayerKind::kSoftmax, 0, 0.0}; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

template <typename T>
struct Parameter {
  BasicTensor<T> value;
  std::vector<double> grad;  // same length as value, accumulated across backward calls
};

enum class Mode {
  kInference,  // dropout is a pass-through
  kTraining,   // fresh dropout masks
  kReplay,     // reuse the masks of the last training pass
};

/// Sequential network over a fixed layer list. Weights are He-uniform for
/// every Conv2D/Dense layer except the final Dense, which is Glorot-uniform;
/// biases start at zero. Not safe for concurrent use of one instance.
template <typename T>
class BasicNetwork {
 public:
  BasicNetwork(Shape input_shape, std::vector<LayerSpec> layers, std::uint64_t seed);

  /// Runs every layer. The input extent must equal `input_shape()` exactly.
  const BasicTensor<T>& forward(const BasicTensor<T>& input, Mode mode = Mode::kInference);

  /// Back-propagates dLoss/dOutput through the last forward pass and adds
  /// into each parameter's `grad`. Returns dLoss/dInput when requested.
  BasicTensor<T> backward(const BasicTensor<T>& grad_output, bool want_input_grad = false);

  /// Combined softmax + cross-entropy backward: the pre-softmax gradient is
  /// (probs - onehot(target)) * scale. Requires a trailing Softmax layer.
  BasicTensor<T> backward_cross_entropy(std::size_t target, double scale = 1.0,
                                        bool want_input_grad = false);

  void zero_grad();

  std::vector<Parameter<T>*> parameters();
  std::vector<const Parameter<T>*> parameters() const;
  std::size_t parameter_count() const;

  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const { return shapes_.back(); }
  /// Output shape of layer i is layer_shapes()[i + 1]; index 0 is the input.
  std::span<const Shape> layer_shapes() const { return shapes_; }
  const std::vector<LayerSpec>& specs() const { return specs_; }
  std::uint64_t seed() const { return seed_; }

  /// Which branch every ReLU input and max-pool window took in the last
  /// forward pass. Two passes with equal patterns lie on the same smooth piece.
  std::vector<std::uint32_t> branch_pattern() const;

  void set_conv_algorithm(ConvAlgorithm algorithm) { conv_algorithm_ = algorithm; }
  ConvAlgorithm conv_algorithm() const { return conv_algorithm_; }

  /// When enabled, forward throws NumericError as soon as a layer emits NaN or Inf.
  void set_finite_checks(bool enabled) { check_finite_ = enabled; }

  /// When set, forward adds each layer's wall time (seconds) into the vector.
  void set_layer_timer(std::vector<double>* seconds) { layer_timer_ = seconds; }

  /// Same architecture and weights in another scalar type (masks and caches are not copied).
  template <typename U>
  BasicNetwork<U> converted() const;

 private:
  template <typename U>
  friend class BasicNetwork;

  struct Layer {
    LayerSpec spec;
    std::vector<Parameter<T>> params;  // {weights, bias} for Conv2D and Dense
    std::vector<std::uint32_t> argmax;
    std::vector<std::uint8_t> mask;
  };

  BasicNetwork() = default;
  void build_shapes();
  BasicTensor<T> backward_through(std::size_t count, BasicTensor<T> grad, bool want_input_grad);
  void initialize(std::uint64_t seed);

  Shape input_shape_;
  std::vector<LayerSpec> specs_;
  std::vector<Shape> shapes_;
  std::vector<Layer> layers_;
  std::vector<BasicTensor<T>> activations_;
  std::uint64_t seed_ = 0;
  Rng dropout_rng_{0};
  Mode last_mode_ = Mode::kInference;
  bool has_forward_ = false;
  ConvAlgorithm conv_algorithm_ = ConvAlgorithm::kIm2col;
  std::vector<double>* layer_timer_ = nullptr;
  bool check_finite_ = false;
};

using Network = BasicNetwork<float>;

}  // namespace eyedrive::nn
