#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "eyedrive/nn/tensor.hpp"
#include "eyedrive/rng.hpp"

namespace eyedrive::nn {

// Stateless layer math. Images are H x W x C, convolution weights 3 x 3 x C x F,
// dense weights N x M. Reductions accumulate in double in a fixed order.
// Backward functions add parameter gradients into caller-owned double buffers.

enum class ConvAlgorithm {
  kIm2col,  // patch matrix times weight matrix
  kDirect,  // straight loop over the 3x3xC window
};

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                              const BasicTensor<T>& bias,
                              ConvAlgorithm algorithm = ConvAlgorithm::kIm2col);

/// `grad_input` may be null when the input gradient is not needed (first layer).
template <typename T>
void conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                     const BasicTensor<T>& grad_output, std::span<double> grad_weights,
                     std::span<double> grad_bias, BasicTensor<T>* grad_input);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_output);

template <typename T>
struct PoolResult {
  BasicTensor<T> output;
  std::vector<std::uint32_t> argmax;  // flat input index of each output's maximum
};

template <typename T>
PoolResult<T> maxpool2x2(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> maxpool2x2_backward(const Shape& input_shape, std::span<const std::uint32_t> argmax,
                                   const BasicTensor<T>& grad_output);

template <typename T>
struct DropoutResult {
  BasicTensor<T> output;
  std::vector<std::uint8_t> mask;  // 1 = kept; empty in inference mode
};

/// Inverted dropout: survivors are scaled by 1/(1-rate) during training. Masks
/// take two 32-bit uniforms from each 64-bit draw of `rng`.
template <typename T>
DropoutResult<T> dropout(const BasicTensor<T>& x, double rate, bool training, Rng& rng);

/// Applies an existing mask (training-mode output for a replayed forward pass).
template <typename T>
BasicTensor<T> dropout_apply(const BasicTensor<T>& x, double rate,
                             std::span<const std::uint8_t> mask);

template <typename T>
BasicTensor<T> dropout_backward(const BasicTensor<T>& grad_output, double rate,
                                std::span<const std::uint8_t> mask);

/// out = x^T W + b, with x read as a flat vector of length N.
template <typename T>
BasicTensor<T> dense_forward(const BasicTensor<T>& x, const BasicTensor<T>& weights,
                             const BasicTensor<T>& bias);

template <typename T>
void dense_backward(const BasicTensor<T>& x, const BasicTensor<T>& weights,
                    const BasicTensor<T>& grad_output, std::span<double> grad_weights,
                    std::span<double> grad_bias, BasicTensor<T>* grad_input);

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& x);

/// Vector-Jacobian product of softmax: p * (g - <g, p>).
template <typename T>
BasicTensor<T> softmax_backward(const BasicTensor<T>& probs, const BasicTensor<T>& grad_output);

/// -ln(max(probs[target], 1e-12)).
template <typename T>
double cross_entropy(const BasicTensor<T>& probs, std::size_t target);

/// One-hot form; throws InputError unless `one_hot` is exactly one 1 and zeros elsewhere.
template <typename T>
double cross_entropy(const BasicTensor<T>& probs, const BasicTensor<T>& one_hot);

inline constexpr double kProbabilityFloor = 1e-12;

}  // namespace eyedrive::nn
