#include "abstractnet/verification.hpp"

#include <algorithm>
#include <cmath>

#include "abstractnet/approximator.hpp"
#include "abstractnet/toy_task.hpp"

namespace abstractnet {
namespace {

constexpr std::size_t kChannels = 4;
constexpr std::size_t kCondChannels = 2;
constexpr std::size_t kSize = 8;

double functional(const ControlNetBlock& cb, const Tensor& x, const Tensor& c, const Tensor& upstream) {
  const Tensor y = controlnet_forward(cb, x, c);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * upstream[i];
  return s;
}

bool all_zero(const Tensor& t) {
  return std::all_of(t.values().begin(), t.values().end(), [](double v) { return v == 0.0; });
}

}  // namespace

ControlNetBlock random_controlnet(std::size_t channels, std::size_t cond_channels, Rng& rng,
                                  Activation act) {
  ControlNetBlock cb = init_controlnet(NetBlock::random(channels, rng, 1.0, 0.1, act), cond_channels);
  for (Param* p : cb.copy.params()) p->value += random_normal(p->value.shape(), rng, 0.05);
  for (Param* p : {&cb.z1.weight, &cb.z1.bias, &cb.z2.weight, &cb.z2.bias}) {
    p->value = random_normal(p->value.shape(), rng, 0.5);
  }
  return cb;
}

GradientCheckStats finite_difference_check(const ControlNetBlock& cb, const Tensor& x,
                                           const Tensor& c, const Tensor& upstream, double eps) {
  GradientCheckStats stats;
  const ControlNetGradients g = compute_gradients(cb, x, c, upstream);

  auto record = [&](const std::string& label, std::size_t i, double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1.0});
    const double rel = std::abs(analytic - numeric) / denom;
    ++stats.checked;
    if (rel >= stats.max_relative_error) {
      stats.max_relative_error = rel;
      stats.worst = label + "[" + std::to_string(i) + "]";
    }
  };

  ControlNetBlock probe = cb;
  const std::vector<std::pair<std::string, std::pair<Param*, const Tensor*>>> params = {
      {"copy.conv1.weight", {&probe.copy.conv1_weight, &g.copy_conv1_weight}},
      {"copy.conv1.bias", {&probe.copy.conv1_bias, &g.copy_conv1_bias}},
      {"copy.conv2.weight", {&probe.copy.conv2_weight, &g.copy_conv2_weight}},
      {"copy.conv2.bias", {&probe.copy.conv2_bias, &g.copy_conv2_bias}},
      {"z1.weight", {&probe.z1.weight, &g.z1_weight}},
      {"z1.bias", {&probe.z1.bias, &g.z1_bias}},
      {"z2.weight", {&probe.z2.weight, &g.z2_weight}},
      {"z2.bias", {&probe.z2.bias, &g.z2_bias}},
  };
  for (const auto& [name, pair] : params) {
    Param* p = pair.first;
    const Tensor& analytic = *pair.second;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + eps;
      const double plus = functional(probe, x, c, upstream);
      p->value[i] = saved - eps;
      const double minus = functional(probe, x, c, upstream);
      p->value[i] = saved;
      record(name, i, analytic[i], (plus - minus) / (2.0 * eps));
    }
  }

  Tensor xp = x;
  for (std::size_t i = 0; i < xp.size(); ++i) {
    const double saved = xp[i];
    xp[i] = saved + eps;
    const double plus = functional(cb, xp, c, upstream);
    xp[i] = saved - eps;
    const double minus = functional(cb, xp, c, upstream);
    xp[i] = saved;
    record("x", i, g.x[i], (plus - minus) / (2.0 * eps));
  }
  Tensor cp = c;
  for (std::size_t i = 0; i < cp.size(); ++i) {
    const double saved = cp[i];
    cp[i] = saved + eps;
    const double plus = functional(cb, x, cp, upstream);
    cp[i] = saved - eps;
    const double minus = functional(cb, x, cp, upstream);
    cp[i] = saved;
    record("c", i, g.c[i], (plus - minus) / (2.0 * eps));
  }
  return stats;
}

CheckResult check_init_identity(std::uint64_t seed, int pairs) {
  Rng rng(derive_seed(seed, std::string_view("init-identity")));
  const ControlNetBlock cb = init_controlnet(NetBlock::random(kChannels, rng), kCondChannels);
  double worst = 0.0;
  for (int i = 0; i < pairs; ++i) {
    const Tensor x = random_normal({kChannels, kSize, kSize}, rng);
    const Tensor c = random_normal({kCondChannels, kSize, kSize}, rng);
    worst = std::max(worst, max_abs_diff(controlnet_forward(cb, x, c), block_forward(cb.locked, x)));
  }
  return {"init_identity", worst < 1e-12, "max_abs_diff=" + format_double(worst)};
}

CheckResult check_gradient_order(std::uint64_t seed) {
  Rng rng(derive_seed(seed, std::string_view("gradient-order")));
  ControlNetBlock cb = init_controlnet(NetBlock::random(kChannels, rng), kCondChannels);
  const Tensor x = random_normal({kChannels, kSize, kSize}, rng);
  const Tensor c = random_normal({kCondChannels, kSize, kSize}, rng);
  const Tensor upstream = random_normal({kChannels, kSize, kSize}, rng);

  backward(cb, x, c, upstream);
  const bool z2_live = !all_zero(cb.z2.weight.grad);
  bool blocked = all_zero(cb.z1.weight.grad) && all_zero(cb.z1.bias.grad);
  for (const Param* p : cb.copy.params()) blocked = blocked && all_zero(p->grad);

  sgd_step(cb, 0.1);
  backward(cb, x, c, upstream);
  bool copy_live = false;
  for (const Param* p : cb.copy.params()) copy_live = copy_live || !all_zero(p->grad);

  const bool ok = z2_live && blocked && copy_live;
  return {"gradient_order", ok,
          std::string("z2_nonzero=") + (z2_live ? "1" : "0") + " copy_z1_zero=" +
              (blocked ? "1" : "0") + " copy_nonzero_after_step=" + (copy_live ? "1" : "0")};
}

CheckResult check_finite_differences(std::uint64_t seed) {
  Rng rng(derive_seed(seed, std::string_view("finite-differences")));
  const ControlNetBlock cb = random_controlnet(kChannels, kCondChannels, rng);
  const Tensor x = random_normal({kChannels, kSize, kSize}, rng);
  const Tensor c = random_normal({kCondChannels, kSize, kSize}, rng);
  const Tensor upstream = random_normal({kChannels, kSize, kSize}, rng);
  const GradientCheckStats s = finite_difference_check(cb, x, c, upstream);
  return {"finite_differences", s.max_relative_error < 1e-6,
          "max_relative_error=" + format_double(s.max_relative_error) + " at " + s.worst +
              " checked=" + std::to_string(s.checked)};
}

CheckResult check_locked_immutability(std::uint64_t seed, int steps) {
  const ToyTask task = make_toy_task(seed);
  ControlNetBlock cb = make_controlnet(task);
  const ControlNetBlock before = cb;
  TrainConfig cfg;
  cfg.steps = steps;
  cfg.seed = seed;
  cfg.log_every = steps;
  train_toy(cb, task, cfg);
  bool same = true;
  const auto a = before.locked.params();
  const auto b = cb.locked.params();
  for (std::size_t i = 0; i < a.size(); ++i) same = same && a[i]->value == b[i]->value;
  return {"locked_immutability", same,
          "steps=" + std::to_string(steps) + " fingerprint_equal=" +
              (locked_fingerprint(before) == locked_fingerprint(cb) ? "1" : "0")};
}

std::vector<CheckResult> run_zeroconv_checks(std::uint64_t seed) {
  return {check_init_identity(seed), check_gradient_order(seed), check_finite_differences(seed),
          check_locked_immutability(seed)};
}

}  // namespace abstractnet
