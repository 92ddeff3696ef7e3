#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "chrono_shield/image.hpp"

namespace chrono_shield {

enum class ImageFormat { ppm, png };

// PPM: binary P6 (and P5 on input), maxval 255.
// PNG: 8-bit grayscale / RGB / opaque palette, non-interlaced.
// Throws MalformedFile or UnsupportedVariant.
RasterImage decode_image(std::span<const std::uint8_t> bytes, ImageFormat format);

// PPM output is canonical: "P6\n<w> <h>\n255\n" followed by RGB samples;
// grayscale input is written with the sample replicated into 3 channels.
std::vector<std::uint8_t> encode_image(const RasterImage& img, ImageFormat format);

// Sniffs the signature; throws MalformedFile for anything unrecognised.
ImageFormat detect_format(std::span<const std::uint8_t> bytes);
// Picks the format from the extension (.png, else PPM).
ImageFormat format_for_path(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
// Writes through a sibling temp file and renames into place.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

RasterImage load_image(const std::filesystem::path& path);
void save_image(const RasterImage& img, const std::filesystem::path& path);

}  // namespace chrono_shield
