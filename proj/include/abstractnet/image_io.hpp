#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "abstractnet/raster.hpp"

namespace abstractnet {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ImageFormat { kPng, kJpeg, kPpm, kUnknown };

/// Sniffs the format from the leading bytes of the file.
ImageFormat detect_format(const std::filesystem::path& path);

/// Decodes PNG, JPEG or binary PPM (P6) into 8-bit RGB. Alpha is dropped.
Raster load_image(const std::filesystem::path& path);

void save_png(const Raster& img, const std::filesystem::path& path);
void save_ppm(const Raster& img, const std::filesystem::path& path);

/// Writes PNG or PPM depending on the extension (".ppm" selects P6).
void save_image(const Raster& img, const std::filesystem::path& path);

Raster decode_ppm(const std::string& bytes);
std::string encode_ppm(const Raster& img);

}  // namespace abstractnet
