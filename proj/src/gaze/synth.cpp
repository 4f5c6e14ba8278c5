#include "eyedrive/gaze/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "eyedrive/errors.hpp"
#include "eyedrive/rng.hpp"

namespace eyedrive::gaze {

namespace {

using Rgb = std::array<double, 3>;

constexpr std::array<Rgb, 4> kIrisColors = {{
    {92, 60, 38},
    {64, 84, 112},
    {72, 92, 60},
    {50, 36, 28},
}};

void validate(const SynthStyle& s) {
  const bool ok = s.min_width >= 16 && s.min_width <= s.max_width && s.min_aspect > 0.0 &&
                  s.min_aspect <= s.max_aspect && s.max_aspect <= 1.5 &&
                  s.min_displacement >= 0.0 && s.min_displacement <= s.max_displacement &&
                  s.max_displacement <= 0.35 && s.lateral_jitter >= 0.0 &&
                  s.offset_jitter >= 0.0 && s.offset_jitter <= 0.1 &&
                  s.brightness_jitter >= 0.0 && s.brightness_jitter < 1.0 &&
                  s.noise_sigma >= 0.0;
  if (!ok) throw ConfigError("inconsistent synthetic eye style");
}

}  // namespace

std::pair<int, int> gaze_direction(GazeClass c) {
  switch (c) {
    case GazeClass::kDown: return {0, 1};
    case GazeClass::kUp: return {0, -1};
    case GazeClass::kLeft: return {-1, 0};
    case GazeClass::kRight: return {1, 0};
    case GazeClass::kStraight: return {0, 0};
  }
  return {0, 0};
}

std::uint64_t sample_seed(std::uint64_t corpus_seed, GazeClass c, std::size_t index) {
  return derive_seed(derive_seed(corpus_seed, index_of(c)), index);
}

std::pair<RawImage, GazeClass> synth_eye(GazeClass c, std::uint64_t seed,
                                         const SynthStyle& style) {
  validate(style);
  Rng rng(seed);

  const auto width = static_cast<std::size_t>(
      style.min_width + rng.below(style.max_width - style.min_width + 1));
  const auto height = std::max<std::size_t>(
      16, static_cast<std::size_t>(std::lround(width * rng.uniform(style.min_aspect,
                                                                   style.max_aspect))));
  const double w = static_cast<double>(width);
  const double h = static_cast<double>(height);

  // Sclera ellipse.
  const double cx = w / 2.0 + rng.uniform(-style.offset_jitter, style.offset_jitter) * w;
  const double cy = h / 2.0 + rng.uniform(-style.offset_jitter, style.offset_jitter) * h;
  const double ax = w * rng.uniform(0.36, 0.42);
  const double ay = h * rng.uniform(0.30, 0.36);
  const double eye_width = 2.0 * ax;

  // Iris and pupil, shifted toward the gaze direction.
  const auto [dx, dy] = gaze_direction(c);
  const double along = rng.uniform(style.min_displacement, style.max_displacement) * eye_width;
  const double lat1 = rng.uniform(-style.lateral_jitter, style.lateral_jitter) * eye_width;
  const double lat2 = rng.uniform(-style.lateral_jitter, style.lateral_jitter) * eye_width;
  double ix = cx;
  double iy = cy;
  if (dx != 0) {
    ix += dx * along;
    iy += lat1;
  } else if (dy != 0) {
    // Vertical travel is limited by the lids; keep the iris center inside the opening.
    iy += dy * std::min(along, 0.85 * ay);
    ix += lat1;
  } else {
    ix += lat1;
    iy += lat2;
  }
  const double iris_r = std::min(ax, ay) * rng.uniform(0.55, 0.70);
  const double pupil_r = iris_r * rng.uniform(0.38, 0.52);

  const Rgb iris = kIrisColors[rng.below(kIrisColors.size())];
  const Rgb skin = {rng.uniform(185, 215), rng.uniform(140, 170), rng.uniform(115, 140)};
  const Rgb lid = {skin[0] * 0.6, skin[1] * 0.6, skin[2] * 0.6};
  const Rgb sclera = {rng.uniform(225, 245), rng.uniform(222, 240), rng.uniform(218, 236)};
  const Rgb pupil = {14, 12, 12};
  const Rgb glint = {250, 250, 250};
  const double glint_r = pupil_r * 0.35;
  const double gx = ix - pupil_r * 0.45;
  const double gy = iy - pupil_r * 0.45;
  const double brightness = 1.0 + rng.uniform(-style.brightness_jitter, style.brightness_jitter);

  RawImage img(width, height, 3);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double px = static_cast<double>(x) + 0.5;
      const double py = static_cast<double>(y) + 0.5;
      const double ex = (px - cx) / ax;
      const double ey = (py - cy) / ay;
      const double e = ex * ex + ey * ey;

      Rgb color = skin;
      if (e <= 1.0) {
        const double ri = std::hypot(px - ix, py - iy);
        if (std::hypot(px - gx, py - gy) <= glint_r) {
          color = glint;
        } else if (ri <= pupil_r) {
          color = pupil;
        } else if (ri <= iris_r) {
          color = iris;
        } else {
          color = sclera;
        }
      } else if (e <= 1.12) {
        color = lid;
      }
      for (std::size_t k = 0; k < 3; ++k) {
        double v = color[k] * brightness;
        if (style.noise_sigma > 0.0) v += style.noise_sigma * rng.normal();
        img.at(x, y, k) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
      }
    }
  }
  return {std::move(img), c};
}

}  // namespace eyedrive::gaze
