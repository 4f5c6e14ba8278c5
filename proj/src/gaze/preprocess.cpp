#include "eyedrive/gaze/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "eyedrive/errors.hpp"

namespace eyedrive::gaze {

Frame::Frame(nn::Tensor pixels) : pixels_(std::move(pixels)) {
  const auto& s = pixels_.shape();
  if (s.size() != 3 || s[0] != s[1] || s[2] != 1) {
    throw ShapeError("frame must be S x S x 1, got " + nn::shape_to_string(s));
  }
  for (const float v : pixels_.values()) {
    if (!(v >= 0.0f && v <= 1.0f)) throw InputError("frame value outside [0, 1]");
  }
}

namespace {

void check_image(const RawImage& img) {
  if (img.channels != 1 && img.channels != 3) {
    throw InputError("image must have 1 or 3 channels, got " + std::to_string(img.channels));
  }
  if (img.pixels.size() != img.width * img.height * img.channels) {
    throw InputError("image pixel buffer does not match its dimensions");
  }
}

}  // namespace

RawImage to_grayscale(const RawImage& img) {
  check_image(img);
  if (img.channels == 1) return img;
  RawImage out(img.width, img.height, 1);
  const std::size_t n = img.width * img.height;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = 0.299 * img.pixels[3 * i] + 0.587 * img.pixels[3 * i + 1] +
                     0.114 * img.pixels[3 * i + 2];
    out.pixels[i] = static_cast<std::uint8_t>(std::min(255.0, std::floor(y + 0.5)));
  }
  return out;
}

Frame resize_bilinear(const RawImage& gray, std::size_t extent) {
  check_image(gray);
  if (gray.channels != 1) throw InputError("resize_bilinear expects a grayscale image");
  if (gray.width < 2 || gray.height < 2) {
    throw InputError("resize source must be at least 2x2, got " + std::to_string(gray.width) +
                     "x" + std::to_string(gray.height));
  }
  if (extent == 0) throw InputError("resize target extent must be positive");

  // Per output coordinate: lower source index and weight of the upper one.
  auto axis_table = [extent](std::size_t src) {
    std::vector<std::pair<std::size_t, double>> t(extent);
    const double scale = static_cast<double>(src) / static_cast<double>(extent);
    for (std::size_t o = 0; o < extent; ++o) {
      double s = (static_cast<double>(o) + 0.5) * scale - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(src - 1));
      auto i0 = static_cast<std::size_t>(s);
      if (i0 >= src - 1) i0 = src - 2;
      t[o] = {i0, s - static_cast<double>(i0)};
    }
    return t;
  };
  const auto xs = axis_table(gray.width);
  const auto ys = axis_table(gray.height);

  nn::Tensor out({extent, extent, 1});
  for (std::size_t oy = 0; oy < extent; ++oy) {
    const auto [y0, fy] = ys[oy];
    for (std::size_t ox = 0; ox < extent; ++ox) {
      const auto [x0, fx] = xs[ox];
      const double p00 = gray.at(x0, y0, 0);
      const double p10 = gray.at(x0 + 1, y0, 0);
      const double p01 = gray.at(x0, y0 + 1, 0);
      const double p11 = gray.at(x0 + 1, y0 + 1, 0);
      const double top = p00 + (p10 - p00) * fx;
      const double bottom = p01 + (p11 - p01) * fx;
      const double v = (top + (bottom - top) * fy) / 255.0;
      out.at(oy, ox, 0) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return Frame(std::move(out));
}

Frame preprocess(const RawImage& img, const CropRect& crop, std::size_t extent) {
  check_image(img);
  if (crop.width == 0 || crop.height == 0 || crop.x > img.width || crop.y > img.height ||
      crop.width > img.width - crop.x || crop.height > img.height - crop.y) {
    throw InputError("crop " + std::to_string(crop.width) + "x" + std::to_string(crop.height) +
                     "+" + std::to_string(crop.x) + "+" + std::to_string(crop.y) +
                     " is outside the " + std::to_string(img.width) + "x" +
                     std::to_string(img.height) + " image");
  }
  RawImage cropped(crop.width, crop.height, img.channels);
  for (std::size_t y = 0; y < crop.height; ++y) {
    const auto* src = &img.pixels[((crop.y + y) * img.width + crop.x) * img.channels];
    std::copy(src, src + crop.width * img.channels,
              &cropped.pixels[y * crop.width * img.channels]);
  }
  return resize_bilinear(to_grayscale(cropped), extent);
}

RawImage to_raw(const Frame& frame) {
  const std::size_t s = frame.extent();
  RawImage out(s, s, 1);
  for (std::size_t y = 0; y < s; ++y) {
    for (std::size_t x = 0; x < s; ++x) {
      out.at(x, y, 0) = static_cast<std::uint8_t>(std::floor(frame.at(x, y) * 255.0 + 0.5));
    }
  }
  return out;
}

}  // namespace eyedrive::gaze
