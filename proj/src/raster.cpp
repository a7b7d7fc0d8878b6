#include "abstractnet/raster.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace abstractnet {

Raster::Raster(int width, int height, Color fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    throw std::invalid_argument("raster dimensions must be positive, got " +
                                std::to_string(width) + "x" + std::to_string(height));
  }
  pixels_.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
  for (std::size_t i = 0; i < pixels_.size(); i += 3) {
    pixels_[i] = fill.r;
    pixels_[i + 1] = fill.g;
    pixels_[i + 2] = fill.b;
  }
}

Raster::Raster(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width < 1 || height < 1) {
    throw std::invalid_argument("raster dimensions must be positive");
  }
  if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3) {
    throw std::invalid_argument("pixel buffer size does not match dimensions");
  }
}

Raster resize_nearest(const Raster& src, int width, int height) {
  Raster out(width, height);
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(src.height() - 1,
                            static_cast<int>((static_cast<long long>(y) * src.height()) / height));
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(src.width() - 1,
                              static_cast<int>((static_cast<long long>(x) * src.width()) / width));
      const std::uint8_t* s = src.pixel(sx, sy);
      std::uint8_t* d = out.pixel(x, y);
      d[0] = s[0];
      d[1] = s[1];
      d[2] = s[2];
    }
  }
  return out;
}

Raster resize_bilinear(const Raster& src, int width, int height) {
  Raster out(width, height);
  const double sx_scale = static_cast<double>(src.width()) / width;
  const double sy_scale = static_cast<double>(src.height()) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy_scale - 0.5, 0.0, src.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx_scale - 0.5, 0.0, src.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const double wx = fx - x0;
      const std::uint8_t* p00 = src.pixel(x0, y0);
      const std::uint8_t* p10 = src.pixel(x1, y0);
      const std::uint8_t* p01 = src.pixel(x0, y1);
      const std::uint8_t* p11 = src.pixel(x1, y1);
      std::uint8_t* d = out.pixel(x, y);
      for (int c = 0; c < 3; ++c) {
        const double top = p00[c] + (p10[c] - p00[c]) * wx;
        const double bottom = p01[c] + (p11[c] - p01[c]) * wx;
        const double v = top + (bottom - top) * wy;
        d[c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

Raster resize_and_center_crop(const Raster& src, int edge) {
  if (edge < 1) throw std::invalid_argument("resize edge must be positive");
  const int shorter = std::min(src.width(), src.height());
  // Scale so the shorter side lands exactly on `edge`.
  const int scaled_w = src.width() == shorter
                           ? edge
                           : static_cast<int>(std::lround(static_cast<double>(src.width()) * edge / shorter));
  const int scaled_h = src.height() == shorter
                           ? edge
                           : static_cast<int>(std::lround(static_cast<double>(src.height()) * edge / shorter));
  const Raster scaled = (scaled_w == src.width() && scaled_h == src.height())
                            ? src
                            : resize_bilinear(src, std::max(scaled_w, edge), std::max(scaled_h, edge));
  const int x_off = (scaled.width() - edge) / 2;
  const int y_off = (scaled.height() - edge) / 2;
  Raster out(edge, edge);
  for (int y = 0; y < edge; ++y) {
    std::copy_n(scaled.pixel(x_off, y_off + y), static_cast<std::size_t>(edge) * 3, out.pixel(0, y));
  }
  return out;
}

}  // namespace abstractnet
