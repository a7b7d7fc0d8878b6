#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "abstractnet/zeroconv.hpp"

namespace abstractnet {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// A ControlNet with every parameter randomized (copy != locked, non-zero
/// zero-convs), used to exercise gradients away from the initialization.
ControlNetBlock random_controlnet(std::size_t channels, std::size_t cond_channels, Rng& rng,
                                  Activation act = Activation::kLeakySilu);

struct GradientCheckStats {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "<param>[index]"
};

/// Compares reverse-mode gradients of <upstream, y_c> with central differences
/// (step `eps`) over every trainable parameter element and both inputs.
/// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, 1).
GradientCheckStats finite_difference_check(const ControlNetBlock& cb, const Tensor& x,
                                           const Tensor& c, const Tensor& upstream,
                                           double eps = 1e-5);

/// Init identity over `pairs` random (x, c): max |y_c - y| < 1e-12.
CheckResult check_init_identity(std::uint64_t seed, int pairs = 100);
/// z2 gradient non-zero and copy/z1 gradients exactly zero at init; copy
/// gradient non-zero after one SGD step.
CheckResult check_gradient_order(std::uint64_t seed);
/// Finite differences on a random 4-channel 8x8 block, max relative error < 1e-6.
CheckResult check_finite_differences(std::uint64_t seed);
/// Locked params bitwise unchanged after `steps` toy-training steps.
CheckResult check_locked_immutability(std::uint64_t seed, int steps = 500);

std::vector<CheckResult> run_zeroconv_checks(std::uint64_t seed);

}  // namespace abstractnet
