#pragma once

#include <filesystem>
#include <utility>

#include "attrib/image.hpp"

namespace attrib {

/// Reads an 8-bit PNG or TIFF. Grayscale files are replicated into all three
/// channels and an alpha channel, if present, is dropped.
Image8 read_image(const std::filesystem::path& path);

/// Width and height of an image file without keeping the decoded pixels.
std::pair<int, int> read_image_size(const std::filesystem::path& path);

/// Writes an 8-bit RGB PNG (or TIFF, by extension). Creates parent directories.
void write_image(const std::filesystem::path& path, const Image8& image);

}  // namespace attrib
