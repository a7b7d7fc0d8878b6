// Acceptance suite: one line per criterion, non-zero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "abstractnet/approximator.hpp"
#include "abstractnet/dataset.hpp"
#include "abstractnet/image_io.hpp"
#include "abstractnet/toy_task.hpp"
#include "abstractnet/zeroconv.hpp"
#include "support/oracles.hpp"

using namespace abstractnet;
namespace fs = std::filesystem;

namespace {

constexpr double kIdentityTol = 1e-12;
constexpr double kGradRelTol = 1e-6;
constexpr double kFdEps = 1e-5;
constexpr double kLossRatio = 0.1;
constexpr double kBaselineTol = 1e-9;
constexpr double kFidelityMin = 0.9;
constexpr double kColorRmsBound = 1.0;   // intensity units per channel
constexpr double kColorExactTol = 1e-9;  // float slack for the unrounded check
constexpr double kProgressRatio = 0.5;

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// 1. Freshly initialized ControlNet reproduces the locked block exactly.
Outcome init_identity() {
  Rng rng(derive_seed(1, "acceptance-identity"));
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const ControlNetBlock cb = init_controlnet(NetBlock::random(4, rng, 1.0, 0.1, Activation::kLeakySilu), 2);
    const Tensor x = random_normal({4, 8, 8}, rng), c = random_normal({2, 8, 8}, rng);
    const Tensor yc = controlnet_forward(cb, x, c);
    const Tensor y = block_forward(cb.locked, x);
    for (std::size_t k = 0; k < y.size(); ++k) worst = std::max(worst, std::abs(yc[k] - y[k]));
  }
  return {worst < kIdentityTol, "pairs=100 max|y_c-y|=" + fmt(worst) + " tol=" + fmt(kIdentityTol)};
}

// 2. Reverse-mode gradients against central differences of the naive forward.
Outcome gradient_correctness() {
  Rng rng(derive_seed(2, "acceptance-fd"));
  ControlNetBlock cb = init_controlnet(NetBlock::random(4, rng, 1.0, 0.1, Activation::kLeakySilu), 2);
  for (Param* p : cb.trainable_params()) {
    const Tensor noise = random_normal(p->value.shape(), rng, 0.3);
    for (std::size_t i = 0; i < noise.size(); ++i) p->value[i] += noise[i];
  }
  const Tensor x = random_normal({4, 8, 8}, rng), c = random_normal({2, 8, 8}, rng);
  const Tensor up = random_normal({4, 8, 8}, rng);
  const ControlNetBlock pristine = cb;
  backward(cb, x, c, up);
  const auto names = ControlNetBlock::param_names();
  const auto params = cb.all_params();
  double worst = 0.0;
  std::string where;
  std::size_t checked = 0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (params[p]->locked) continue;
    for (std::size_t e = 0; e < params[p]->value.size(); ++e) {
      const double numeric = oracle::numeric_param_gradient(pristine, p, e, x, c, up, kFdEps);
      const double err = oracle::relative_error(params[p]->grad[e], numeric);
      ++checked;
      if (err > worst) {
        worst = err;
        where = names[p] + "[" + std::to_string(e) + "]";
      }
    }
  }
  return {worst < kGradRelTol, "elements=" + std::to_string(checked) + " max_rel_err=" + fmt(worst) + " at " +
                                   where + " tol=" + fmt(kGradRelTol)};
}

bool all_zero(const Tensor& t) {
  for (double v : t.values())
    if (v != 0.0) return false;
  return true;
}

// 3. Only z2 receives gradient at init; the copy unlocks after one step.
Outcome gradient_order() {
  const ToyTask task = make_toy_task(3);
  ControlNetBlock cb = make_controlnet(task);
  Rng rng(derive_seed(3, "acceptance-order"));
  const ToySample s = task.sample(rng);
  const auto mse_upstream = [&](const ControlNetBlock& b) {
    Tensor up = controlnet_forward(b, s.x, s.c) - s.target;
    up *= 2.0 / double(up.size());
    return up;
  };
  backward(cb, s.x, s.c, mse_upstream(cb));
  const bool z2_live = !all_zero(cb.z2.weight.grad) && !all_zero(cb.z2.bias.grad);
  bool blocked = true;
  for (const Param* p : {&cb.copy.conv1_weight, &cb.copy.conv1_bias, &cb.copy.conv2_weight,
                         &cb.copy.conv2_bias, &cb.z1.weight, &cb.z1.bias})
    blocked = blocked && all_zero(p->grad);
  sgd_step(cb, 0.05);
  backward(cb, s.x, s.c, mse_upstream(cb));
  const bool copy_live = !all_zero(cb.copy.conv1_weight.grad) && !all_zero(cb.copy.conv2_weight.grad);
  return {z2_live && blocked && copy_live, std::string("init: z2 grad ") + (z2_live ? "nonzero" : "ZERO") +
                                               ", copy/z1 grad " + (blocked ? "exactly zero" : "NONZERO") +
                                               "; after one step: copy grad " + (copy_live ? "nonzero" : "ZERO")};
}

// 4. Locked parameters bitwise unchanged by training.
Outcome locked_immutability() {
  const ToyTask task = make_toy_task(4);
  ControlNetBlock cb = make_controlnet(task);
  std::vector<Tensor> before;
  for (const Param* p : cb.locked.params()) before.push_back(p->value);
  TrainConfig cfg;
  cfg.steps = 500;
  cfg.log_every = 500;
  train_toy(cb, task, cfg);
  const auto after = cb.locked.params();
  bool same = true;
  std::size_t elements = 0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    same = same && std::memcmp(before[i].values().data(), after[i]->value.values().data(),
                               before[i].size() * sizeof(double)) == 0;
    elements += before[i].size();
  }
  return {same, "steps=500 locked elements=" + std::to_string(elements) + (same ? " bitwise equal" : " CHANGED")};
}

// 5. Toy conditioning learns.
Outcome toy_learns() {
  constexpr std::uint64_t kSeed = 7;
  const ToyTask task = make_toy_task(kSeed);
  ControlNetBlock cb = make_controlnet(task);
  TrainConfig cfg;
  cfg.steps = 500;
  cfg.learning_rate = 0.05;
  cfg.seed = kSeed;
  const TrainLog log = train_toy(cb, task, cfg);

  double sse = 0.0;
  std::size_t n = 0;
  for (const ToySample& s : task.eval_set) {
    const Tensor y = block_forward(task.locked, s.x);
    for (std::size_t i = 0; i < y.size(); ++i) sse += (y[i] - s.target[i]) * (y[i] - s.target[i]);
    n += y.size();
  }
  const double baseline = sse / double(n);
  const double step0 = log.rows.front().loss;
  const bool ok = log.rows.size() == 500 && std::abs(step0 - baseline) < kBaselineTol &&
                  log.final_loss < kLossRatio * step0 && log.rows.front().condition_fidelity == 0.0 &&
                  log.final_fidelity > kFidelityMin;
  return {ok, "step0=" + fmt(step0) + " baseline=" + fmt(baseline) + " |diff|=" + fmt(std::abs(step0 - baseline)) +
                  " final=" + fmt(log.final_loss) + " ratio=" + fmt(log.final_loss / step0) +
                  " fidelity0=" + fmt(log.rows.front().condition_fidelity) + " fidelity=" + fmt(log.final_fidelity)};
}

// 6. Scanline rasterization equals the brute-force pixel-center oracle.
Outcome rasterization() {
  Rng rng(derive_seed(6, "acceptance-raster"));
  int mismatches = 0;
  long long pixels = 0;
  for (int i = 0; i < 1000; ++i) {
    const Triangle t = random_triangle(rng, 32, 32);
    const auto got = oracle::scanline_pixels(rasterize_triangle(t, 32, 32));
    if (got != oracle::brute_force_pixels(t, 32, 32)) ++mismatches;
    pixels += static_cast<long long>(got.size());
  }
  return {mismatches == 0,
          "triangles=1000 mismatches=" + std::to_string(mismatches) + " pixels=" + std::to_string(pixels)};
}

// 7. Exhaustive per-channel search cannot beat the least-squares color beyond
// the quantization bound. Rounding moves every blended output by at most half a
// unit, so by the triangle inequality the per-pixel RMS error of the returned
// color exceeds the exhaustive optimum by at most 1 unit; under the unrounded
// blend the returned color must be the exact integer optimum.
Outcome optimal_color() {
  Rng rng(derive_seed(7, "acceptance-color"));
  double worst_excess = 0.0;
  int exact_failures = 0;
  for (int inst = 0; inst < 100; ++inst) {
    Raster t(16, 16), c(16, 16);
    for (auto& b : t.bytes()) b = std::uint8_t(rng() & 0xff);
    for (auto& b : c.bytes()) b = std::uint8_t(rng() & 0xff);
    const int alpha = 1 + int(rng() % 255);
    std::vector<Scanline> cov;
    while (cov.empty()) cov = rasterize_triangle(random_triangle(rng, 16, 16), 16, 16);
    const auto pixels = oracle::scanline_pixels(cov);
    const Color col = compute_optimal_color(t, c, cov, alpha);
    const int ours[3] = {col.r, col.g, col.b};
    for (int ch = 0; ch < 3; ++ch) {
      double best_rounded = 1e300, best_exact = 1e300;
      for (int v = 0; v < 256; ++v) {
        best_rounded = std::min(best_rounded, oracle::blended_channel_error(t, c, pixels, ch, v, alpha, true));
        best_exact = std::min(best_exact, oracle::blended_channel_error(t, c, pixels, ch, v, alpha, false));
      }
      const double n = double(pixels.size());
      const double mine_rounded = oracle::blended_channel_error(t, c, pixels, ch, ours[ch], alpha, true);
      const double mine_exact = oracle::blended_channel_error(t, c, pixels, ch, ours[ch], alpha, false);
      worst_excess = std::max(worst_excess, std::sqrt(mine_rounded / n) - std::sqrt(best_rounded / n));
      if (mine_exact > best_exact + kColorExactTol) ++exact_failures;
    }
  }
  return {worst_excess <= kColorRmsBound && exact_failures == 0,
          "instances=100 max_rms_excess=" + fmt(worst_excess) + " bound=" + fmt(kColorRmsBound) +
              " unrounded_non_optimal=" + std::to_string(exact_failures)};
}

// 8. Approximator makes monotone, deterministic progress on the split image.
Outcome approximator_progress() {
  const Raster target = oracle::half_split(64);
  ApproxConfig cfg;
  cfg.shape_count = 50;
  cfg.seed = 42;
  const ApproxState a = approximate(target, cfg);
  const ApproxState b = approximate(target, cfg);
  cfg.jobs = 4;
  const ApproxState c = approximate(target, cfg);

  bool decreasing = !a.trace().empty();
  for (std::size_t i = 1; i < a.trace().size(); ++i) decreasing = decreasing && a.trace()[i] < a.trace()[i - 1];
  // Flat canvas: every channel mean is 127.5, rounded half up.
  const double flat = oracle::naive_rmse(target, Raster(64, 64, Color{128, 128, 128, 255}));
  const double final_score = oracle::naive_rmse(target, a.canvas());
  const bool deterministic = a.shapes() == b.shapes() && a.canvas() == b.canvas() && a.trace() == b.trace() &&
                             a.shapes() == c.shapes() && a.canvas() == c.canvas() && a.trace() == c.trace();
  return {decreasing && final_score < kProgressRatio * flat && deterministic,
          "shapes=" + std::to_string(a.shapes().size()) + " flat=" + fmt(flat) + " final=" + fmt(final_score) +
              " ratio=" + fmt(final_score / flat) + (decreasing ? " strictly decreasing" : " NOT decreasing") +
              (deterministic ? " deterministic(jobs 1,1,4)" : " NONDETERMINISTIC")};
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    files[fs::relative(e.path(), root).generic_string()] = ss.str();
  }
  return files;
}

// 9. Ten captioned images build into a clean, reproducible dataset.
Outcome pipeline() {
  oracle::TempDir in("accept-in"), out_a("accept-a"), out_b("accept-b");
  for (int i = 0; i < 10; ++i) {
    const std::string stem = "sample" + std::to_string(i);
    const Raster img = oracle::synthetic_image(260 + 17 * i, 300 - 9 * i, 100 + i);
    if (i % 3 == 2) {
      save_ppm(img, in / (stem + ".ppm"));
    } else {
      save_png(img, in / (stem + ".png"));
    }
    std::ofstream(in / (stem + ".txt")) << "an abstract rendition of sample " << i << "\n";
  }
  BuildConfig cfg;
  cfg.input_dir = in.path();
  cfg.output_dir = out_a.path();
  cfg.resize = 256;
  cfg.seed = 9;
  const BuildReport ra = build(cfg);
  cfg.output_dir = out_b.path();
  const BuildReport rb = build(cfg);

  const ValidationReport v = validate_manifest(out_a.path());
  // Bijection, checked directly against the directory contents.
  std::set<std::string> referenced, present;
  bool dims_equal = true;
  for (const auto& e : v.entries) {
    referenced.insert(e.source);
    referenced.insert(e.target);
    const Raster s = load_image(out_a / e.source), t = load_image(out_a / e.target);
    dims_equal = dims_equal && s.width() == t.width() && s.height() == t.height() && t.width() == 256 &&
                 t.height() == 256;
  }
  for (const char* sub : {kSourceDir, kTargetDir})
    for (const auto& e : fs::directory_iterator(out_a / sub))
      present.insert(std::string(sub) + "/" + e.path().filename().string());
  const bool bijection = referenced.size() == 20 && referenced == present;
  const bool identical = snapshot(out_a.path()) == snapshot(out_b.path());
  const bool ok = ra.processed == 10 && ra.skipped.empty() && rb.processed == 10 && v.entries.size() == 10 &&
                  v.ok() && dims_equal && bijection && identical;
  return {ok, "processed=" + std::to_string(ra.processed) + " skipped=" + std::to_string(ra.skipped.size()) +
                  " entries=" + std::to_string(v.entries.size()) + " failed=" + std::to_string(v.failed()) +
                  " orphans=" + std::to_string(v.orphans.size()) + (dims_equal ? " dims=256x256" : " DIMS MISMATCH") +
                  (bijection ? " bijection" : " NOT BIJECTIVE") +
                  (identical ? " byte-identical" : " RUNS DIFFER")};
}

struct Criterion {
  int id;
  const char* name;
  double time_limit_s;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "init identity", 5.0, init_identity},
      {2, "gradient correctness", 60.0, gradient_correctness},
      {3, "gradient unlocking order", 60.0, gradient_order},
      {4, "locked immutability", 120.0, locked_immutability},
      {5, "toy conditioning learns", 120.0, toy_learns},
      {6, "rasterization oracle", 10.0, rasterization},
      {7, "optimal-color oracle", 30.0, optimal_color},
      {8, "approximator progress", 30.0, approximator_progress},
      {9, "pipeline end-to-end", 300.0, pipeline},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.time_limit_s;
    const bool passed = o.passed && in_time;
    if (!passed) ++failures;
    std::printf("[%s] %d %s: %s; time=%.2fs limit=%.0fs\n", passed ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.time_limit_s);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
