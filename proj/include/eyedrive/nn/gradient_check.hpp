#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "eyedrive/nn/network.hpp"

namespace eyedrive::nn {

struct GradientCheckOptions {
  double step = 1e-3;                 // central-difference half width
  std::size_t samples_per_tensor = 64;  // 0 checks every element
  std::uint64_t seed = 1;
  std::size_t target = 0;             // class for the cross-entropy loss
  bool include_input = true;          // also check dLoss/dInput
  /// Elements whose analytic and numeric gradients are both below this are
  /// skipped: central differences cannot resolve them against round-off.
  double resolution = 1e-8;
  /// Test hook: may alter the analytic gradient of tensor `index` before comparison.
  std::function<void(std::size_t index, std::vector<double>& grad)> tamper;
};

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;       // +h and -h crossed a ReLU or max-pool branch
  std::size_t skipped_unresolved = 0;  // below `resolution`
  std::string worst;  // "param <i>[<j>]" or "input[<j>]"
};

/// Compares back-propagated gradients with central finite differences.
/// Networks ending in Softmax use cross-entropy against `target`; others use
/// a fixed random projection of the output. Dropout masks are drawn once and
/// replayed for every perturbed evaluation. Error per element is
/// |a - n| / (|a| + |n| + 1e-12), taken over elements where the loss is
/// smooth across [x - h, x + h].
GradientCheckResult gradient_check(BasicNetwork<double>& net, const BasicTensor<double>& input,
                                   const GradientCheckOptions& options = {});

}  // namespace eyedrive::nn
