#pragma once

#include <cstddef>

#include "eyedrive/gaze/image.hpp"

namespace eyedrive::gaze {

struct CropRect {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t width = 0;
  std::size_t height = 0;

  static CropRect full(const RawImage& img) { return {0, 0, img.width, img.height}; }
};

/// BT.601 luma, rounded half-up. Single-channel input is returned unchanged.
RawImage to_grayscale(const RawImage& img);

/// Bilinear resample of a grayscale image to `extent` x `extent` with
/// pixel-center alignment and edge clamping, scaled by 1/255.
/// Throws InputError for a source smaller than 2x2 or a color image.
Frame resize_bilinear(const RawImage& gray, std::size_t extent = kFrameExtent);

/// Crop, grayscale, resize, normalize. Throws InputError if the crop leaves the image.
Frame preprocess(const RawImage& img, const CropRect& crop, std::size_t extent = kFrameExtent);

/// Quantizes a frame back to an 8-bit gray RawImage (round half-up).
RawImage to_raw(const Frame& frame);

}  // namespace eyedrive::gaze
