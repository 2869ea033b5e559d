#pragma once

#include <filesystem>
#include <string>

#include "morphfit/image.hpp"

namespace morphfit {

/// 8-bit PNG (gray, RGB or RGBA by channel count). Values are clamped to [0,1] and rounded.
void write_png(const std::filesystem::path& path, const Image& image);
std::string encode_png(const Image& image);
Image read_png(const std::filesystem::path& path);
Image decode_png(const std::string& bytes);

/// Portable float map, 1 ("Pf") or 3 ("PF") channels, little-endian, rows stored bottom-up.
void write_pfm(const std::filesystem::path& path, const Image& image);
Image read_pfm(const std::filesystem::path& path);

/// Reads PNG or PFM by extension.
Image read_image(const std::filesystem::path& path);

}  // namespace morphfit
