#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "abstractnet/raster.hpp"
#include "abstractnet/tensor.hpp"

namespace abstractnet {

/// A learnable tensor with its gradient. Locked params are never updated.
struct Param {
  Tensor value;
  Tensor grad;
  bool locked = false;

  Param() = default;
  explicit Param(Tensor v, bool is_locked = false)
      : value(std::move(v)), grad(value.shape()), locked(is_locked) {}

  void zero_grad() { grad.fill(0.0); }
};

// kLeakySilu is a * (0.5 + 0.5 * sigmoid(a)): sigmoid-weighted like SiLU but
// with slope >= ~0.45 everywhere, so it has no dead region.
enum class Activation { kSilu, kLeakySilu, kTanh, kIdentity };

double activate(Activation act, double a);
double activate_derivative(Activation act, double a);
const char* activation_name(Activation act);
Activation parse_activation(const std::string& name);

/// 3x3 conv (pad 1) -> activation -> 3x3 conv (pad 1), equal channel counts
/// so the output can be added to the input.
struct NetBlock {
  Activation activation = Activation::kSilu;
  Param conv1_weight;  // (C, C, 3, 3)
  Param conv1_bias;    // (C)
  Param conv2_weight;  // (C, C, 3, 3)
  Param conv2_bias;    // (C)

  std::size_t channels() const { return conv1_bias.value.size(); }

  static NetBlock zeros(std::size_t channels, Activation act = Activation::kSilu);
  /// Weights ~ N(0, weight_gain^2 / (9 C)), biases ~ N(0, bias_std^2).
  static NetBlock random(std::size_t channels, Rng& rng, double weight_gain = 1.0,
                         double bias_std = 0.1, Activation act = Activation::kSilu);

  void set_locked(bool locked);
  std::vector<Param*> params();
  std::vector<const Param*> params() const;
};

/// 1x1 convolution plus bias, zero at construction.
struct ZeroConv {
  Param weight;  // (C_out, C_in, 1, 1)
  Param bias;    // (C_out)

  ZeroConv() = default;
  ZeroConv(std::size_t in_channels, std::size_t out_channels);

  std::size_t in_channels() const { return weight.value.extent(1); }
  std::size_t out_channels() const { return weight.value.extent(0); }
};

/// y_c = F(x; locked) + z2(F(x + z1(c); copy)).
struct ControlNetBlock {
  NetBlock locked;
  NetBlock copy;
  ZeroConv z1;
  ZeroConv z2;

  std::vector<Param*> trainable_params();
  std::vector<Param*> all_params();
  std::vector<const Param*> all_params() const;
  /// Names parallel to `all_params()`.
  static std::vector<std::string> param_names();
};

/// Clones `locked` into a trainable copy and attaches zero convolutions that
/// read `cond_channels` condition channels.
ControlNetBlock init_controlnet(const NetBlock& locked, std::size_t cond_channels);

Tensor conv3x3_forward(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor block_forward(const NetBlock& block, const Tensor& x);
Tensor zero_conv_forward(const ZeroConv& z, const Tensor& x);
Tensor controlnet_forward(const ControlNetBlock& cb, const Tensor& x, const Tensor& c);

/// Gradients of one backward pass. Locked-block parameters get none.
struct ControlNetGradients {
  Tensor copy_conv1_weight, copy_conv1_bias, copy_conv2_weight, copy_conv2_bias;
  Tensor z1_weight, z1_bias, z2_weight, z2_bias;
  Tensor x;
  Tensor c;

  ControlNetGradients& operator+=(const ControlNetGradients& other);
};

/// Reverse-mode gradients of <upstream, controlnet_forward(cb, x, c)>.
ControlNetGradients compute_gradients(const ControlNetBlock& cb, const Tensor& x, const Tensor& c,
                                      const Tensor& upstream);

/// Stores the parameter gradients in each trainable Param's `grad` and returns
/// the input gradients. Locked Params' grads are left at zero.
ControlNetGradients backward(ControlNetBlock& cb, const Tensor& x, const Tensor& c,
                             const Tensor& upstream);

/// Copies parameter gradients into the matching Params.
void store_gradients(ControlNetBlock& cb, const ControlNetGradients& grads);

/// Plain SGD on every non-locked Param.
void sgd_step(ControlNetBlock& cb, double learning_rate);

/// Maps an RGB raster to a condition tensor: nearest-neighbour resize to
/// height x width, channel k takes raster channel k mod 3 scaled to [0, 1].
Tensor raster_to_condition(const Raster& control, std::size_t channels, std::size_t height,
                           std::size_t width);

/// Runs the ControlNet on `x` with the condition derived from `control`.
Tensor infer(const ControlNetBlock& cb, const Raster& control, const Tensor& x);

/// FNV-1a over the bytes of every locked-block parameter value.
std::uint64_t locked_fingerprint(const ControlNetBlock& cb);

}  // namespace abstractnet
