#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "eyedrive/nn/tensor.hpp"

namespace eyedrive::gaze {

/// 8-bit interleaved image; channels is 3 (RGB) or 1 (gray).
struct RawImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 3;
  std::vector<std::uint8_t> pixels;

  RawImage() = default;
  RawImage(std::size_t w, std::size_t h, std::size_t ch, std::uint8_t fill = 0)
      : width(w), height(h), channels(ch), pixels(w * h * ch, fill) {}

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) {
    return pixels[(y * width + x) * channels + c];
  }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const {
    return pixels[(y * width + x) * channels + c];
  }

  friend bool operator==(const RawImage&, const RawImage&) = default;
};

/// Square grayscale network input, values in [0, 1], stored as an S x S x 1 tensor.
class Frame {
 public:
  Frame() = default;
  /// Throws ShapeError unless `pixels` is S x S x 1 and InputError if a value leaves [0, 1].
  explicit Frame(nn::Tensor pixels);

  const nn::Tensor& tensor() const { return pixels_; }
  std::size_t extent() const { return pixels_.empty() ? 0 : pixels_.extent(0); }
  float at(std::size_t x, std::size_t y) const { return pixels_.at(y, x, 0); }

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  nn::Tensor pixels_;
};

inline constexpr std::size_t kFrameExtent = 128;

}  // namespace eyedrive::gaze
