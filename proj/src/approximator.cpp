#include "abstractnet/approximator.hpp"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace abstractnet {

void ApproxConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  };
  require(shape_count >= 0, "shape_count must be non-negative");
  require(candidates >= 1, "candidates must be at least 1");
  require(climb_steps >= 0, "climb_steps must be non-negative");
  require(max_stall >= 1, "max_stall must be at least 1");
  require(alpha >= 1 && alpha <= 255, "alpha must be in [1,255]");
  require(max_retries >= 0, "max_retries must be non-negative");
  require(radii.spawn_radius >= 0 && radii.mutate_radius >= 0, "shape radii must be non-negative");
  require(jobs >= 1, "jobs must be at least 1");
}

ApproxState::ApproxState(Raster target, Raster canvas)
    : target_(std::move(target)), canvas_(std::move(canvas)) {
  sse_ = sum_squared_error(target_, canvas_);
}

double ApproxState::score_for_sse(std::uint64_t sse) const {
  return std::sqrt(static_cast<double>(sse) / (3.0 * static_cast<double>(target_.pixel_count())));
}

double ApproxState::score() const { return score_for_sse(sse_); }

void ApproxState::accept(const PlacedShape& shape, std::span<const Scanline> coverage) {
  sse_ = sse_with_shape(*this, coverage, shape.color);
  draw_shape_inplace(canvas_, coverage, shape.color);
  shapes_.push_back(shape);
  trace_.push_back(score());
}

Color average_color(const Raster& img) {
  if (img.empty()) throw std::invalid_argument("average_color of an empty raster");
  std::uint64_t sums[3] = {0, 0, 0};
  const auto& px = img.bytes();
  for (std::size_t i = 0; i < px.size(); i += 3) {
    sums[0] += px[i];
    sums[1] += px[i + 1];
    sums[2] += px[i + 2];
  }
  const auto n = static_cast<std::uint64_t>(img.pixel_count());
  // Round half up: floor(sum / n + 1/2).
  auto mean = [n](std::uint64_t s) { return static_cast<std::uint8_t>((2 * s + n) / (2 * n)); };
  return {mean(sums[0]), mean(sums[1]), mean(sums[2]), 255};
}

std::uint64_t sum_squared_error(const Raster& target, const Raster& canvas) {
  if (target.width() != canvas.width() || target.height() != canvas.height()) {
    throw std::invalid_argument("raster dimensions differ");
  }
  std::uint64_t sse = 0;
  const auto& t = target.bytes();
  const auto& c = canvas.bytes();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const int d = static_cast<int>(t[i]) - static_cast<int>(c[i]);
    sse += static_cast<std::uint64_t>(d * d);
  }
  return sse;
}

double score_rmse(const Raster& target, const Raster& canvas) {
  const std::uint64_t sse = sum_squared_error(target, canvas);
  return std::sqrt(static_cast<double>(sse) / (3.0 * static_cast<double>(target.pixel_count())));
}

Color compute_optimal_color(const Raster& target, const Raster& canvas,
                            std::span<const Scanline> coverage, int alpha) {
  if (alpha < 1 || alpha > 255) throw std::invalid_argument("alpha must be in [1,255]");
  std::int64_t t_sum[3] = {0, 0, 0};
  std::int64_t c_sum[3] = {0, 0, 0};
  std::int64_t count = 0;
  for (const Scanline& s : coverage) {
    const std::uint8_t* t = target.pixel(s.x_start, s.y);
    const std::uint8_t* c = canvas.pixel(s.x_start, s.y);
    const int n = (s.x_end - s.x_start + 1) * 3;
    for (int i = 0; i < n; i += 3) {
      t_sum[0] += t[i];
      t_sum[1] += t[i + 1];
      t_sum[2] += t[i + 2];
      c_sum[0] += c[i];
      c_sum[1] += c[i + 1];
      c_sum[2] += c[i + 2];
    }
    count += n / 3;
  }
  if (count == 0) throw std::invalid_argument("optimal color needs non-empty coverage");
  const double a = alpha / 255.0;
  auto solve = [&](int ch) {
    const double mean_t = static_cast<double>(t_sum[ch]) / static_cast<double>(count);
    const double mean_c = static_cast<double>(c_sum[ch]) / static_cast<double>(count);
    const double v = (mean_t - mean_c * (1.0 - a)) / a;
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  };
  return {solve(0), solve(1), solve(2), static_cast<std::uint8_t>(alpha)};
}

void draw_shape_inplace(Raster& canvas, std::span<const Scanline> coverage, Color color) {
  if (color.a == 0) return;
  for (const Scanline& s : coverage) {
    std::uint8_t* p = canvas.pixel(s.x_start, s.y);
    const int n = (s.x_end - s.x_start + 1) * 3;
    for (int i = 0; i < n; i += 3) {
      p[i] = blend_channel(color.r, p[i], color.a);
      p[i + 1] = blend_channel(color.g, p[i + 1], color.a);
      p[i + 2] = blend_channel(color.b, p[i + 2], color.a);
    }
  }
}

Raster draw_shape(const Raster& canvas, std::span<const Scanline> coverage, Color color) {
  Raster out = canvas;
  draw_shape_inplace(out, coverage, color);
  return out;
}

std::uint64_t sse_with_shape(const ApproxState& state, std::span<const Scanline> coverage,
                             Color color) {
  std::int64_t sse = static_cast<std::int64_t>(state.sse());
  if (color.a == 0) return state.sse();
  const Raster& target = state.target();
  const Raster& canvas = state.canvas();
  const int src[3] = {color.r, color.g, color.b};
  for (const Scanline& s : coverage) {
    const std::uint8_t* t = target.pixel(s.x_start, s.y);
    const std::uint8_t* c = canvas.pixel(s.x_start, s.y);
    const int n = (s.x_end - s.x_start + 1) * 3;
    for (int i = 0; i < n; ++i) {
      const int before = static_cast<int>(t[i]) - static_cast<int>(c[i]);
      const int after = static_cast<int>(t[i]) - blend_channel(src[i % 3], c[i], color.a);
      sse += after * after - before * before;
    }
  }
  return static_cast<std::uint64_t>(sse);
}

double score_with_shape(const ApproxState& state, std::span<const Scanline> coverage,
                        Color color) {
  return state.score_for_sse(sse_with_shape(state, coverage, color));
}

Candidate evaluate_triangle(const ApproxState& state, const Triangle& tri, int alpha) {
  const Raster& target = state.target();
  const auto coverage = rasterize_triangle(tri, target.width(), target.height());
  if (coverage.empty()) {
    return {tri, Color{0, 0, 0, static_cast<std::uint8_t>(alpha)}, state.sse()};
  }
  const Color color = compute_optimal_color(target, state.canvas(), coverage, alpha);
  return {tri, color, sse_with_shape(state, coverage, color)};
}

namespace {

Candidate make_candidate(const ApproxState& state, const ApproxConfig& config,
                         std::uint64_t base_seed, std::size_t index) {
  Rng rng(derive_seed(base_seed, index));
  const Triangle tri =
      random_triangle(rng, state.target().width(), state.target().height(), config.radii);
  return evaluate_triangle(state, tri, config.alpha);
}

}  // namespace

std::vector<Candidate> score_candidates_serial(const ApproxState& state, const ApproxConfig& config,
                                               std::uint64_t base_seed) {
  std::vector<Candidate> out(static_cast<std::size_t>(config.candidates));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = make_candidate(state, config, base_seed, i);
  return out;
}

std::vector<Candidate> score_candidates_parallel(const ApproxState& state,
                                                 const ApproxConfig& config,
                                                 std::uint64_t base_seed, int jobs) {
  const auto n = static_cast<std::int64_t>(config.candidates);
  std::vector<Candidate> out(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static) num_threads(jobs)
  for (std::int64_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] =
        make_candidate(state, config, base_seed, static_cast<std::size_t>(i));
  }
  return out;
}

std::size_t best_candidate(std::span<const Candidate> candidates) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (candidates[i].sse < candidates[best].sse) best = i;
  }
  return best;
}

HillClimbResult hill_climb(const ApproxState& state, const ApproxConfig& config, Rng& rng) {
  const std::uint64_t base_seed = rng();
  const auto candidates = config.jobs > 1
                              ? score_candidates_parallel(state, config, base_seed, config.jobs)
                              : score_candidates_serial(state, config, base_seed);
  Candidate best = candidates[best_candidate(candidates)];
  const double best_initial = state.score_for_sse(best.sse);

  const int width = state.target().width();
  const int height = state.target().height();
  int stall = 0;
  for (int step = 0; step < config.climb_steps; ++step) {
    const Triangle moved = mutate_triangle(best.triangle, rng, width, height, config.radii);
    const Candidate trial = evaluate_triangle(state, moved, config.alpha);
    if (trial.sse < best.sse) {
      best = trial;
      stall = 0;
    } else if (++stall >= config.max_stall) {
      break;
    }
  }
  return {{best.triangle, best.color}, best.sse, state.score_for_sse(best.sse), best_initial};
}

ApproxState approximate(const Raster& target, const ApproxConfig& config) {
  config.validate();
  if (target.empty()) throw std::invalid_argument("cannot approximate an empty raster");
  ApproxState state(target, Raster(target.width(), target.height(), average_color(target)));
  Rng rng(config.seed);
  for (int round = 0; round < config.shape_count; ++round) {
    bool accepted = false;
    for (int attempt = 0; attempt <= config.max_retries && !accepted; ++attempt) {
      const HillClimbResult result = hill_climb(state, config, rng);
      if (result.sse < state.sse()) {
        const auto coverage =
            rasterize_triangle(result.shape.triangle, target.width(), target.height());
        state.accept(result.shape, coverage);
        accepted = true;
      }
    }
    if (!accepted) break;
  }
  return state;
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string trace_csv(std::span<const double> trace) {
  std::string out = "shape_index,score\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    out += format_double(trace[i]);
    out += '\n';
  }
  return out;
}

}  // namespace abstractnet
