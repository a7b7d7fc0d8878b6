#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace abstractnet {

struct Color {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  std::uint8_t a = 255;

  friend bool operator==(const Color&, const Color&) = default;
};

/// Fixed-size 8-bit RGB image, row-major, three bytes per pixel.
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, Color fill = {0, 0, 0, 255});
  Raster(int width, int height, std::vector<std::uint8_t> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return width_ == 0 || height_ == 0; }
  long long pixel_count() const { return static_cast<long long>(width_) * height_; }

  std::uint8_t* pixel(int x, int y) { return &pixels_[offset(x, y)]; }
  const std::uint8_t* pixel(int x, int y) const { return &pixels_[offset(x, y)]; }

  Color color_at(int x, int y) const {
    const std::uint8_t* p = pixel(x, y);
    return {p[0], p[1], p[2], 255};
  }
  void set(int x, int y, Color c) {
    std::uint8_t* p = pixel(x, y);
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }

  const std::vector<std::uint8_t>& bytes() const { return pixels_; }
  std::vector<std::uint8_t>& bytes() { return pixels_; }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) * 3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Nearest-neighbour resample to exactly `width` x `height`.
Raster resize_nearest(const Raster& src, int width, int height);

/// Bilinear resample to exactly `width` x `height` (pixel-center aligned).
Raster resize_bilinear(const Raster& src, int width, int height);

/// Resizes so the shorter edge equals `edge`, then center-crops to an
/// `edge` x `edge` square.
Raster resize_and_center_crop(const Raster& src, int edge);

}  // namespace abstractnet
