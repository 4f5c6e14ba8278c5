#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "eyedrive/gaze/gaze_class.hpp"
#include "eyedrive/gaze/image.hpp"
#include "eyedrive/gaze/synth.hpp"

namespace eyedrive::gaze {

enum class SplitTag { kAll, kTrain, kVal };

std::string to_string(SplitTag tag);

using ClassCounts = std::array<std::size_t, kNumClasses>;

/// Frames with labels. `source_index` maps each sample back to its position
/// in the set it was split from, which keeps splits auditable.
struct LabeledSet {
  std::vector<Frame> frames;
  std::vector<GazeClass> labels;
  std::vector<std::size_t> source_index;
  SplitTag tag = SplitTag::kAll;

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }
  ClassCounts class_counts() const;
  /// Throws InputError if the parallel vectors disagree in length or frame extent.
  void validate() const;
  void push_back(Frame frame, GazeClass label);
};

/// The reference class distribution scaled to `total` samples (largest remainder).
ClassCounts scaled_counts(std::size_t total);

/// Generates `counts[c]` samples per class, preprocessed to `extent`, in class order.
LabeledSet generate_corpus(const ClassCounts& counts, std::uint64_t seed,
                           const SynthStyle& style = {}, std::size_t extent = kFrameExtent);

struct DatasetManifest {
  ClassCounts counts{};
  std::uint64_t seed = 0;
  SynthStyle style;
  std::size_t total() const;
};

/// Writes `<dir>/<ClassName>/<index>.png` (raw RGB renders) and `<dir>/manifest.json`.
/// `progress`, when set, is called with the number of images written so far.
DatasetManifest write_dataset(const std::filesystem::path& dir, const ClassCounts& counts,
                              std::uint64_t seed, const SynthStyle& style = {},
                              const std::function<void(std::size_t)>& progress = {});

DatasetManifest read_manifest(const std::filesystem::path& dir);

/// Loads every image listed by the manifest and preprocesses it (full-image crop).
LabeledSet load_dataset(const std::filesystem::path& dir, std::size_t extent = kFrameExtent);

/// Stratified seeded split. The validation part holds floor(n * val_fraction)
/// samples, apportioned to classes by largest remainder, and every class with
/// at least two samples lands in both parts. Throws InputError on an empty set
/// and ConfigError for a fraction outside (0, 1).
std::pair<LabeledSet, LabeledSet> split(const LabeledSet& set, double val_fraction,
                                        std::uint64_t seed);

}  // namespace eyedrive::gaze
