#pragma once

#include <filesystem>

#include "eyedrive/gaze/image.hpp"

namespace eyedrive::gaze {

/// Writes an 8-bit RGB or gray PNG. Throws IoError on failure.
void write_png(const RawImage& img, const std::filesystem::path& path);

/// Reads any PNG and returns 8-bit RGB. Throws IoError on failure.
RawImage read_png(const std::filesystem::path& path);

}  // namespace eyedrive::gaze
