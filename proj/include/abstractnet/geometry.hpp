#pragma once

#include <span>
#include <vector>

#include "abstractnet/seeding.hpp"

namespace abstractnet {

/// Integer pixel coordinate. May lie outside the image; rasterization clips.
struct Point {
  int x = 0;
  int y = 0;

  friend bool operator==(const Point&, const Point&) = default;
};

struct Triangle {
  Point v0;
  Point v1;
  Point v2;

  friend bool operator==(const Triangle&, const Triangle&) = default;
};

/// One horizontal run of covered pixels, both ends inclusive.
struct Scanline {
  int y = 0;
  int x_start = 0;
  int x_end = 0;

  friend bool operator==(const Scanline&, const Scanline&) = default;
};

/// Inclusive pixel bounds. The default-constructed box is the empty marker.
struct BoundingBox {
  int x_min = 0;
  int y_min = 0;
  int x_max = -1;
  int y_max = -1;

  bool empty() const { return x_min > x_max || y_min > y_max; }
  static BoundingBox empty_box() { return {}; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Vertex offset radii for shape proposals. Spawned triangles keep v1/v2
/// within `spawn_radius` of v0; mutations move one vertex by at most
/// `mutate_radius` and keep it within `mutate_radius` pixels of the image.
struct ShapeRadii {
  int spawn_radius = 15;
  int mutate_radius = 16;
};

Triangle random_triangle(Rng& rng, int width, int height, const ShapeRadii& radii = {});

Triangle mutate_triangle(const Triangle& tri, Rng& rng, int width, int height,
                         const ShapeRadii& radii = {});

/// Twice the signed area; positive for counter-clockwise winding in y-down
/// image coordinates as seen by `rasterize_triangle`.
long long doubled_signed_area(const Triangle& tri);

/// Pixels whose centers (px + 0.5, py + 0.5) lie inside or on the boundary of
/// `tri`, clipped to the image. Zero-area triangles cover nothing. The result
/// is sorted by row with at most one scanline per row.
std::vector<Scanline> rasterize_triangle(const Triangle& tri, int width, int height);

BoundingBox bounding_box(std::span<const Scanline> scanlines);

/// Total number of pixels covered by `scanlines`.
long long pixel_count(std::span<const Scanline> scanlines);

}  // namespace abstractnet
