#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

#include "eyedrive/gaze/dataset.hpp"
#include "eyedrive/gaze/gaze_class.hpp"
#include "eyedrive/nn/network.hpp"

namespace eyedrive::gaze {

/// confusion[actual][predicted], indexed by GazeClass.
using ConfusionMatrix = std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses>;

struct EvalReport {
  ConfusionMatrix confusion{};
  std::array<double, kNumClasses> precision{};
  std::array<double, kNumClasses> recall{};
  std::array<double, kNumClasses> f1{};
  std::array<std::uint64_t, kNumClasses> support{};
  double accuracy = 0.0;
  std::uint64_t total = 0;
};

/// Precision TP/(TP+FP), recall TP/(TP+FN), F1 their harmonic mean, support
/// the row sum, accuracy trace/total. A zero denominator yields 0.
EvalReport report_from_confusion(const ConfusionMatrix& confusion);

/// Runs predict over the set. Throws InputError for an empty set.
EvalReport evaluate(nn::Network& net, const LabeledSet& set);

/// Half-up rounding to `decimals` places, as printed in the rendered tables.
double round_half_up(double value, int decimals = 2);
std::string format_metric(double value);

/// Confusion matrix and classification report as aligned text tables.
std::string render_text(const EvalReport& report);

/// Machine-readable report with keys classes, confusion, precision, recall,
/// f1, support, accuracy and total (unrounded values).
std::string render_json(const EvalReport& report);

}  // namespace eyedrive::gaze
