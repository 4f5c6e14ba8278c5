#pragma once

#include <cstdint>
#include <vector>

#include "eyedrive/nn/network.hpp"

namespace eyedrive::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment estimates for one parameter list, in the list's order.
template <typename T>
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<BasicTensor<T>> first_moment;
  std::vector<BasicTensor<T>> second_moment;

  AdamState() = default;
  AdamState(const std::vector<Parameter<T>*>& params, AdamConfig cfg = {});
};

/// One bias-corrected Adam update of every parameter from its accumulated
/// `grad`. Throws ShapeError if the state was built for different shapes.
template <typename T>
void adam_step(AdamState<T>& state, const std::vector<Parameter<T>*>& params);

}  // namespace eyedrive::nn
