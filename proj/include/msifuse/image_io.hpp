#pragma once

#include <filesystem>

#include "msifuse/image.hpp"

namespace msi {

/// Loads a lossless raster. Supported: PNG (8/16-bit gray or RGB) and the
/// text gray-map format written by save_image for .pgm paths (P2).
ImageBuffer load_image(const std::filesystem::path& path);

/// Writes PNG for .png paths and a text gray map (P2) for .pgm paths.
/// Round trips are byte-identical on sample data.
void save_image(const ImageBuffer& img, const std::filesystem::path& path);

}  // namespace msi
