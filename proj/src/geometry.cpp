#include "abstractnet/geometry.hpp"

#include <algorithm>
#include <array>
#include <limits>

namespace abstractnet {
namespace {

int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

long long floor_div(long long a, long long b) {
  long long q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

long long ceil_div(long long a, long long b) { return -floor_div(-a, b); }

}  // namespace

Triangle random_triangle(Rng& rng, int width, int height, const ShapeRadii& radii) {
  const int r = radii.spawn_radius;
  Triangle t;
  t.v0 = {uniform_int(rng, 0, width - 1), uniform_int(rng, 0, height - 1)};
  t.v1 = {t.v0.x + uniform_int(rng, -r, r), t.v0.y + uniform_int(rng, -r, r)};
  t.v2 = {t.v0.x + uniform_int(rng, -r, r), t.v0.y + uniform_int(rng, -r, r)};
  return t;
}

Triangle mutate_triangle(const Triangle& tri, Rng& rng, int width, int height,
                         const ShapeRadii& radii) {
  const int r = radii.mutate_radius;
  Triangle out = tri;
  Point* vertex = nullptr;
  switch (uniform_int(rng, 0, 2)) {
    case 0: vertex = &out.v0; break;
    case 1: vertex = &out.v1; break;
    default: vertex = &out.v2; break;
  }
  const int dx = uniform_int(rng, -r, r);
  const int dy = uniform_int(rng, -r, r);
  vertex->x = std::clamp(vertex->x + dx, -r, width - 1 + r);
  vertex->y = std::clamp(vertex->y + dy, -r, height - 1 + r);
  return out;
}

long long doubled_signed_area(const Triangle& tri) {
  const long long ax = tri.v1.x - tri.v0.x;
  const long long ay = tri.v1.y - tri.v0.y;
  const long long bx = tri.v2.x - tri.v0.x;
  const long long by = tri.v2.y - tri.v0.y;
  return ax * by - ay * bx;
}

std::vector<Scanline> rasterize_triangle(const Triangle& input, int width, int height) {
  std::vector<Scanline> lines;
  const long long area = doubled_signed_area(input);
  if (area == 0 || width < 1 || height < 1) return lines;

  Triangle tri = input;
  if (area < 0) std::swap(tri.v1, tri.v2);

  // Work in doubled coordinates so pixel centers (2px+1, 2py+1) are integral.
  // For an edge a->b a center p is inside iff cross(b - a, p - a) >= 0, which
  // per row is the linear constraint k * px + m >= 0.
  struct Edge {
    long long ax, ay, dx, dy;
  };
  const std::array<Edge, 3> edges = {{
      {2LL * tri.v0.x, 2LL * tri.v0.y, 2LL * (tri.v1.x - tri.v0.x), 2LL * (tri.v1.y - tri.v0.y)},
      {2LL * tri.v1.x, 2LL * tri.v1.y, 2LL * (tri.v2.x - tri.v1.x), 2LL * (tri.v2.y - tri.v1.y)},
      {2LL * tri.v2.x, 2LL * tri.v2.y, 2LL * (tri.v0.x - tri.v2.x), 2LL * (tri.v0.y - tri.v2.y)},
  }};

  const int y_lo = std::max(0, std::min({tri.v0.y, tri.v1.y, tri.v2.y}) - 1);
  const int y_hi = std::min(height - 1, std::max({tri.v0.y, tri.v1.y, tri.v2.y}));
  for (int y = y_lo; y <= y_hi; ++y) {
    const long long py = 2LL * y + 1;
    long long lo = 0;
    long long hi = width - 1;
    for (const Edge& e : edges) {
      const long long k = -2 * e.dy;
      const long long m = e.dx * (py - e.ay) - e.dy * (1 - e.ax);
      if (k > 0) {
        lo = std::max(lo, ceil_div(-m, k));
      } else if (k < 0) {
        hi = std::min(hi, floor_div(m, -k));
      } else if (m < 0) {
        hi = -1;
      }
      if (lo > hi) break;
    }
    if (lo <= hi) lines.push_back({y, static_cast<int>(lo), static_cast<int>(hi)});
  }
  return lines;
}

BoundingBox bounding_box(std::span<const Scanline> scanlines) {
  if (scanlines.empty()) return BoundingBox::empty_box();
  BoundingBox box{std::numeric_limits<int>::max(), std::numeric_limits<int>::max(),
                  std::numeric_limits<int>::min(), std::numeric_limits<int>::min()};
  for (const Scanline& s : scanlines) {
    box.x_min = std::min(box.x_min, s.x_start);
    box.x_max = std::max(box.x_max, s.x_end);
    box.y_min = std::min(box.y_min, s.y);
    box.y_max = std::max(box.y_max, s.y);
  }
  return box;
}

long long pixel_count(std::span<const Scanline> scanlines) {
  long long n = 0;
  for (const Scanline& s : scanlines) n += s.x_end - s.x_start + 1;
  return n;
}

}  // namespace abstractnet
