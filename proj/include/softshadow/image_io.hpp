#pragma once

#include "softshadow/image.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace softshadow {

// Portable float map. Single-channel images use the "Pf" variant, color
// images "PF". Always written little-endian (negative scale); big-endian
// files are accepted on read.
std::string encode_pfm(const ImageBuffer& image);
ImageBuffer decode_pfm(std::string_view bytes);
std::string encode_pfm(const ColorImage& image);
ColorImage decode_pfm_color(std::string_view bytes);

void write_pfm(const std::filesystem::path& path, const ImageBuffer& image);
ImageBuffer read_pfm(const std::filesystem::path& path);

// 8-bit PNG. Gray images are quantized from [0,1] with rounding.
std::string encode_png_gray(const ImageBuffer& image);
std::string encode_png(const ColorImage& image);
/// Decodes any PNG into float channels in [0,1]; gray stays 1 channel,
/// gray+alpha is expanded to RGBA.
ColorImage decode_png(std::string_view bytes);
/// Decodes a PNG and returns its first channel.
ImageBuffer decode_png_gray(std::string_view bytes);

void write_png_gray(const std::filesystem::path& path, const ImageBuffer& image);
ImageBuffer read_png_gray(const std::filesystem::path& path);

/// Normalizes by `scale` (or the image max when scale <= 0) into an 8-bit preview.
std::string encode_png_preview(const ImageBuffer& image, float scale = 0.0f);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

} // namespace softshadow
