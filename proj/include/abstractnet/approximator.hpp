#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "abstractnet/geometry.hpp"
#include "abstractnet/raster.hpp"
#include "abstractnet/seeding.hpp"

namespace abstractnet {

struct PlacedShape {
  Triangle triangle;
  Color color;

  friend bool operator==(const PlacedShape&, const PlacedShape&) = default;
};

struct ApproxConfig {
  int shape_count = 50;
  int candidates = 200;
  int climb_steps = 100;
  int max_stall = 30;
  int alpha = 128;
  std::uint64_t seed = 0;
  int max_retries = 3;
  ShapeRadii radii;
  // Worker threads for candidate scoring. Results do not depend on it.
  int jobs = 1;

  /// Throws std::invalid_argument naming the first out-of-range field.
  void validate() const;
};

/// Evolving approximation of `target`. The canvas error is tracked as an exact
/// integer sum of squared channel differences, so `score()` always equals
/// `score_rmse(target(), canvas())`.
class ApproxState {
 public:
  ApproxState(Raster target, Raster canvas);

  const Raster& target() const { return target_; }
  const Raster& canvas() const { return canvas_; }
  const std::vector<PlacedShape>& shapes() const { return shapes_; }
  const std::vector<double>& trace() const { return trace_; }

  std::uint64_t sse() const { return sse_; }
  double score() const;
  double score_for_sse(std::uint64_t sse) const;

  /// Blends `shape` over `coverage`, records it and appends the new score.
  void accept(const PlacedShape& shape, std::span<const Scanline> coverage);

 private:
  Raster target_;
  Raster canvas_;
  std::vector<PlacedShape> shapes_;
  std::vector<double> trace_;
  std::uint64_t sse_ = 0;
};

Color average_color(const Raster& img);

std::uint64_t sum_squared_error(const Raster& target, const Raster& canvas);

/// Root-mean-square per-channel error. Throws std::invalid_argument when the
/// dimensions differ.
double score_rmse(const Raster& target, const Raster& canvas);

/// round(src * a + dst * (1 - a)) with a = alpha / 255, in exact integer form.
inline std::uint8_t blend_channel(int src, int dst, int alpha) {
  const int num = src * alpha + dst * (255 - alpha);
  return static_cast<std::uint8_t>((2 * num + 255) / 510);
}

/// Least-squares fill color for blending at `alpha` over `coverage`.
/// Throws std::invalid_argument on empty coverage.
Color compute_optimal_color(const Raster& target, const Raster& canvas,
                            std::span<const Scanline> coverage, int alpha);

void draw_shape_inplace(Raster& canvas, std::span<const Scanline> coverage, Color color);
Raster draw_shape(const Raster& canvas, std::span<const Scanline> coverage, Color color);

/// Sum of squared errors the canvas would have after drawing, computed only
/// over `coverage`.
std::uint64_t sse_with_shape(const ApproxState& state, std::span<const Scanline> coverage,
                             Color color);

/// RMSE the canvas would have after drawing, without materializing it.
double score_with_shape(const ApproxState& state, std::span<const Scanline> coverage,
                        Color color);

struct Candidate {
  Triangle triangle;
  Color color;
  std::uint64_t sse = 0;
};

/// Scores one triangle with its optimal color. Triangles that cover no pixel
/// leave the canvas unchanged.
Candidate evaluate_triangle(const ApproxState& state, const Triangle& tri, int alpha);

/// Generates and scores `config.candidates` random triangles. Candidate i is
/// drawn from its own stream `derive_seed(base_seed, i)`.
std::vector<Candidate> score_candidates_serial(const ApproxState& state, const ApproxConfig& config,
                                               std::uint64_t base_seed);
/// OpenMP version of `score_candidates_serial`; identical output.
std::vector<Candidate> score_candidates_parallel(const ApproxState& state,
                                                 const ApproxConfig& config,
                                                 std::uint64_t base_seed, int jobs);

/// Lowest error wins; ties go to the lowest index.
std::size_t best_candidate(std::span<const Candidate> candidates);

struct HillClimbResult {
  PlacedShape shape;
  std::uint64_t sse = 0;
  double score = 0.0;
  double best_initial_score = 0.0;
};

HillClimbResult hill_climb(const ApproxState& state, const ApproxConfig& config, Rng& rng);

ApproxState approximate(const Raster& target, const ApproxConfig& config);

std::string export_svg(std::span<const PlacedShape> shapes, int width, int height,
                       Color background);

/// CSV with header `shape_index,score`, one row per accepted shape.
std::string trace_csv(std::span<const double> trace);

/// Locale-independent shortest round-trip formatting.
std::string format_double(double value);

}  // namespace abstractnet
