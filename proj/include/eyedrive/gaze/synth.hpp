#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>

#include "eyedrive/gaze/gaze_class.hpp"
#include "eyedrive/gaze/image.hpp"

namespace eyedrive::gaze {

/// Rendering knobs for synthetic eye images. Lengths are fractions of the
/// image or eye size so the look is independent of the sampled resolution.
struct SynthStyle {
  std::size_t min_width = 112;
  std::size_t max_width = 160;
  double min_aspect = 0.70;  // height / width
  double max_aspect = 0.90;
  double min_displacement = 0.22;  // iris shift as a fraction of eye width
  double max_displacement = 0.30;
  double lateral_jitter = 0.05;    // off-axis iris shift, fraction of eye width
  double offset_jitter = 0.04;     // eye center shift, fraction of image size
  double brightness_jitter = 0.15;
  double noise_sigma = 6.0;        // per-channel Gaussian noise, 8-bit units

  friend bool operator==(const SynthStyle&, const SynthStyle&) = default;
};

/// Unit direction the pupil moves for a class, in image axes (y grows down).
std::pair<int, int> gaze_direction(GazeClass c);

/// Renders one RGB eye. Deterministic in (class, seed, style).
/// Throws ConfigError if the style is inconsistent.
std::pair<RawImage, GazeClass> synth_eye(GazeClass c, std::uint64_t seed,
                                         const SynthStyle& style = {});

/// Seed used for sample `index` of class `c` in a corpus.
std::uint64_t sample_seed(std::uint64_t corpus_seed, GazeClass c, std::size_t index);

}  // namespace eyedrive::gaze
